"""
Django configuration package for the twisted Dirac laboratory.
"""
