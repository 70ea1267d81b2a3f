"""
Flat torus M = ℝ²/(L₁ℤ × L₂ℤ) with one of its four spin structures.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Tuple

import numpy as np

from lab.exceptions import ConfigError

logger = logging.getLogger(__name__)

SPIN_SHIFTS = {
    'periodic': 0.0,
    'antiperiodic': 0.5,
}


@dataclass(frozen=True)
class TorusDomain:
    """
    Grid and spin structure of the flat torus.

    Antiperiodic directions are realised by half-integer Fourier frequencies:
    a spinor stored at the grid sites is phase(x) · φ(x) with φ periodic and
    phase = exp(2πi(s₁x/L₁ + s₂y/L₂)).
    """

    Nx: int = 16
    Ny: int = 16
    L1: float = 2.0 * np.pi
    L2: float = 2.0 * np.pi
    spin_structure: Tuple[str, str] = ('periodic', 'periodic')

    def __post_init__(self):
        for n in (self.Nx, self.Ny):
            if n < 4 or n % 2:
                raise ConfigError(f"Grid sizes must be even and at least 4, got {self.Nx}×{self.Ny}")
        if self.L1 <= 0 or self.L2 <= 0:
            raise ConfigError(f"Side lengths must be positive, got ({self.L1}, {self.L2})")
        structure = tuple(self.spin_structure)
        for flag in structure:
            if flag not in SPIN_SHIFTS:
                raise ConfigError(
                    f"Unknown spin structure flag: {flag!r}",
                    details={'allowed': sorted(SPIN_SHIFTS)},
                )
        if len(structure) != 2:
            raise ConfigError("Spin structure needs one flag per direction")
        object.__setattr__(self, 'spin_structure', structure)

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'TorusDomain':
        Nx, Ny = config.get('grid', (16, 16))
        L1, L2 = config.get('L', (2.0 * np.pi, 2.0 * np.pi))
        structure = config.get('spin_structure', ('periodic', 'periodic'))
        return cls(Nx=int(Nx), Ny=int(Ny), L1=float(L1), L2=float(L2), spin_structure=tuple(structure))

    def with_spin_structure(self, structure: Tuple[str, str]) -> 'TorusDomain':
        return TorusDomain(self.Nx, self.Ny, self.L1, self.L2, tuple(structure))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.Nx, self.Ny)

    @property
    def sites(self) -> int:
        return self.Nx * self.Ny

    @property
    def shift(self) -> np.ndarray:
        return np.array([SPIN_SHIFTS[flag] for flag in self.spin_structure])

    @property
    def cell_area(self) -> float:
        return self.L1 * self.L2 / self.sites

    @property
    def volume(self) -> float:
        return self.L1 * self.L2

    @property
    def has_nyquist_mode(self) -> bool:
        """True when some direction is periodic, so its lattice contains −N/2."""
        return bool(np.any(self.shift == 0.0))

    @property
    def cache_key(self) -> str:
        flags = '-'.join(self.spin_structure)
        return f"torus:{self.Nx}x{self.Ny}:{self.L1!r}x{self.L2!r}:{flags}"

    def describe(self) -> Dict[str, Any]:
        return {
            'grid': [self.Nx, self.Ny],
            'L': [self.L1, self.L2],
            'spin_structure': list(self.spin_structure),
        }

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Site coordinates (X, Y), each of shape (Nx, Ny)."""
        x = np.arange(self.Nx) * self.L1 / self.Nx
        y = np.arange(self.Ny) * self.L2 / self.Ny
        return np.meshgrid(x, y, indexing='ij')

    @cached_property
    def phase(self) -> np.ndarray:
        X, Y = self.coordinates
        s1, s2 = self.shift
        return np.exp(2j * np.pi * (s1 * X / self.L1 + s2 * Y / self.L2))

    @cached_property
    def integer_modes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Integer Fourier indices k in FFT order, including the Nyquist index −N/2."""
        k1 = np.fft.fftfreq(self.Nx) * self.Nx
        k2 = np.fft.fftfreq(self.Ny) * self.Ny
        return np.meshgrid(k1, k2, indexing='ij')
