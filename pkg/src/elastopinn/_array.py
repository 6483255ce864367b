import numpy as np


def as_real(a) -> np.ndarray:
    """Array view of ``a``; floating dtypes (including longdouble) are kept."""
    a = np.asarray(a)
    return a if np.issubdtype(a.dtype, np.floating) else a.astype(np.float64)
