"""Big-integer kernels with an accelerated gmpy2 path and a pure-Python fallback.

The active implementation is chosen once, at import time, from the
``HESEARCH_BACKEND`` environment variable:

    HESEARCH_BACKEND=gmpy2    use GMP through gmpy2 (default when importable)
    HESEARCH_BACKEND=python   builtin ``pow``/``int`` only

Both implementations expose the same four callables (``mpz``, ``powmod``,
``invert``, ``gcd``) so callers never branch on the backend. ``benchmarks/bench_backend.py`` times one against the other.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

__all__ = ["ACTIVE", "PYTHON", "GMPY2", "mpz", "powmod", "invert", "gcd", "name"]


def _py_invert(a, m):
    try:
        return pow(a, -1, m)
    except ValueError:
        raise ValueError("value is not invertible modulo m") from None


PYTHON = SimpleNamespace(
    name="python",
    mpz=int,
    powmod=pow,
    invert=_py_invert,
    gcd=math.gcd,
)

try:
    import gmpy2 as _gmpy2
except ImportError:  # pragma: no cover - gmpy2 ships in the dev environment
    GMPY2 = None
else:

    def _gmp_invert(a, m):
        try:
            return _gmpy2.invert(a, m)
        except ZeroDivisionError:
            raise ValueError("value is not invertible modulo m") from None

    GMPY2 = SimpleNamespace(
        name="gmpy2",
        mpz=_gmpy2.mpz,
        powmod=_gmpy2.powmod,
        invert=_gmp_invert,
        gcd=_gmpy2.gcd,
    )


def _select():
    wanted = os.environ.get("HESEARCH_BACKEND", "").strip().lower()
    if wanted in ("python", "pure", "0"):
        return PYTHON
    if wanted in ("", "gmpy2", "gmp", "1"):
        if GMPY2 is None:
            if wanted:
                raise ImportError("HESEARCH_BACKEND=gmpy2 but gmpy2 is not installed")
            return PYTHON
        return GMPY2
    raise ValueError(f"unknown HESEARCH_BACKEND {wanted!r}; expected 'gmpy2' or 'python'")


ACTIVE = _select()

name: str = ACTIVE.name
mpz = ACTIVE.mpz
powmod = ACTIVE.powmod
invert = ACTIVE.invert
gcd = ACTIVE.gcd
