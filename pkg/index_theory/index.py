"""
Mod-2 index arithmetic from complex kernel dimensions.
"""
from lab.exceptions import ConfigError, OddKernelDimension, Unsupported


def _check_dimension(dim_c_kernel: int) -> int:
    dim_c_kernel = int(dim_c_kernel)
    if dim_c_kernel < 0:
        raise ConfigError(f"Kernel dimension must be non-negative, got {dim_c_kernel}")
    return dim_c_kernel


def script_I(dim_c_kernel: int) -> int:
    """
    [½ dim_ℂ ker D_{1,0}]_{ℤ₂}.

    Raises:
        OddKernelDimension: If the complex kernel dimension is odd
    """
    dim_c_kernel = _check_dimension(dim_c_kernel)
    if dim_c_kernel % 2:
        raise OddKernelDimension(
            f"Complex kernel dimension {dim_c_kernel} is odd",
            details={'dim_c_kernel': dim_c_kernel},
        )
    return (dim_c_kernel // 2) % 2


def index_I(m: int, dim_c_kernel: int) -> int:
    """
    Kernel-dimension branches of the ℤ₂-valued index in dimension m:
    m ≡ 1 (8) gives dim mod 2, m ≡ 2 (8) gives dim/2 mod 2, m ≡ 3, 5, 6, 7 (8)
    give 0.

    Raises:
        Unsupported: For m ≡ 0, 4 (8), where the index is not a kernel count
        OddKernelDimension: For m ≡ 2 (8) with an odd kernel dimension
    """
    m = int(m)
    if m < 1:
        raise ConfigError(f"Domain dimension must be positive, got {m}")
    dim_c_kernel = _check_dimension(dim_c_kernel)
    residue = m % 8
    if residue in (0, 4):
        raise Unsupported(
            f"Index in dimension {m} ≡ {residue} (mod 8) is not determined by the kernel",
            details={'m': m},
        )
    if residue == 1:
        return dim_c_kernel % 2
    if residue == 2:
        return script_I(dim_c_kernel)
    return 0
