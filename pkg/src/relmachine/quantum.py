"""Schrödinger evolution oracle: truncated Taylor series with a certified bound.

Units follow hbar = 1, so ``tau`` already carries the division by hbar.
States are complex numpy vectors of length 2**n; Hamiltonians are dense
Hermitian 2**n x 2**n arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .oracles import OracleBinding, OracleError

MAX_QUBITS = 10
TIME_INT_BITS = 8


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    def __init__(self, max_entry_error: float):
        self.max_entry_error = max_entry_error
        super().__init__(f"matrix is not Hermitian (max |H_ab - conj(H_ba)| = {max_entry_error:g})")


def n_qubits_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def hermitian_error(H) -> float:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    n_qubits_of(H.shape[0])
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def check_hermitian(H, tol: float = 1e-12) -> None:
    err = hermitian_error(H)
    if err > tol:
        raise NotHermitianError(err)


def taylor_order_for(H, tau: float, epsilon: float) -> int:
    """Smallest J with B^(J+1)/(J+1)! * e^B <= epsilon, B = ||H tau||_F."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    B = float(np.linalg.norm(H)) * abs(tau)
    if B == 0.0:
        return 0
    log_eps = math.log(epsilon)
    J = 0
    while (J + 1) * math.log(B) - math.lgamma(J + 2) + B > log_eps:
        J += 1
    return J


def remainder_bound(H, tau: float, order: int) -> float:
    B = float(np.linalg.norm(H)) * abs(tau)
    if B == 0.0:
        return 0.0
    return math.exp((order + 1) * math.log(B) - math.lgamma(order + 2) + B)


def _check_pair(psi, H):
    psi = np.asarray(psi, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if psi.ndim != 1:
        raise DimensionError("state must be a vector")
    n_qubits_of(psi.shape[0])
    if H.shape != (psi.shape[0], psi.shape[0]):
        raise DimensionError(f"Hamiltonian of shape {H.shape} does not act on a state of length {psi.shape[0]}")
    return psi, H


def evolve(psi0, H, tau: float, epsilon: float = 1e-9, order: int | None = None) -> np.ndarray:
    """Truncated Taylor evolution of ``psi0`` under ``H`` for time ``tau``.

    The partial sum is accumulated Horner-style with one matrix-vector
    product per term; powers of ``H`` are never formed.  With ``order``
    omitted the truncation order comes from :func:`taylor_order_for`, which
    certifies a 2-norm error of at most ``epsilon`` for unit vectors.
    """
    psi0, H = _check_pair(psi0, H)
    check_hermitian(H)
    J = taylor_order_for(H, tau, epsilon) if order is None else order
    if J < 0:
        raise ValueError("truncation order must be non-negative")
    v = psi0.copy()
    c = -1j * tau
    for j in range(J, 0, -1):
        v = psi0 + (c / j) * (H @ v)
    return v


def evolve_exact(psi0, H, tau: float) -> np.ndarray:
    """Reference evolution U diag(exp(-i lambda tau)) U^dagger psi0."""
    psi0, H = _check_pair(psi0, H)
    if psi0.shape[0] > 1 << MAX_QUBITS:
        raise DimensionError(f"exact evolution limited to {MAX_QUBITS} qubits")
    try:
        w, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("eigensolver did not converge") from exc
    return U @ (np.exp(-1j * w * tau) * (U.conj().T @ psi0))


def norm(psi) -> float:
    return float(np.linalg.norm(psi))


def renormalize(psi) -> np.ndarray:
    n = norm(psi)
    if n == 0.0:
        raise ZeroDivisionError("cannot renormalize the zero vector")
    return np.asarray(psi, dtype=complex) / n


def random_hermitian(rng: np.random.Generator, n_qubits: int, scale: float = 1.0) -> np.ndarray:
    dim = 1 << n_qubits
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = (A + A.conj().T) / 2
    return scale * H / np.linalg.norm(H, 2)


def random_state(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    dim = 1 << n_qubits
    return renormalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


# -- measurement ---------------------------------------------------------------

def measure_with_uncertainty(x: float, k_bits: int) -> tuple[float, tuple[float, float]]:
    """Truncate ``x`` to ``k_bits`` fractional bits.

    Returns the measured value and the half-open interval ``[lo, hi)`` of all
    reals that truncate to it.
    """
    if k_bits < 1:
        raise ValueError("k_bits must be at least 1")
    lo = math.ldexp(math.floor(math.ldexp(x, k_bits)), -k_bits)
    return lo, (lo, lo + math.ldexp(1.0, -k_bits))


# -- fixed-point codec -------------------------------------------------------------
#
# Amplitude components use a p-bit two's-complement code v read as
# (v + 1/2) / 2**(p-1): 2**p levels spread evenly over [-1, 1] with no level
# at the ends, so every component in [-1, 1] is within 2**-p of its code.

def _twos(v: int, bits: int) -> str:
    return format(v & ((1 << bits) - 1), f"0{bits}b")


def _untwos(text: str) -> int:
    v = int(text, 2)
    return v - (1 << len(text)) if text[0] == "1" else v


def quantize_component(x: float, precision: int) -> int:
    scale = 1 << (precision - 1)
    v = math.floor(x * scale)
    return min(max(v, -scale), scale - 1)


def dequantize_component(v: int, precision: int) -> float:
    return (v + 0.5) / (1 << (precision - 1))


def encode_amplitudes(psi, precision: int) -> str:
    if precision < 2:
        raise ValueError("precision must be at least 2 bits")
    out = []
    for a in np.asarray(psi, dtype=complex):
        for part in (a.real, a.imag):
            if abs(part) > 1.0:
                raise OverflowError(f"amplitude component {part} outside [-1, 1]")
            out.append(_twos(quantize_component(float(part), precision), precision))
    return "".join(out)


def decode_amplitudes(bits: str, precision: int) -> np.ndarray:
    if len(bits) % (2 * precision):
        raise ValueError("bit length is not a whole number of amplitudes")
    parts = [dequantize_component(_untwos(bits[i:i + precision]), precision)
             for i in range(0, len(bits), precision)]
    return np.array(parts[0::2]) + 1j * np.array(parts[1::2])


def encode_time(tau: float, frac_bits: int, int_bits: int = TIME_INT_BITS) -> str:
    """Two's-complement fixed point, rounded to nearest."""
    v = round(math.ldexp(tau, frac_bits))
    width = int_bits + frac_bits
    if not -(1 << (width - 1)) <= v < 1 << (width - 1):
        raise OverflowError(f"time {tau} does not fit in {int_bits} integer bits")
    return _twos(v, width)


def decode_time(bits: str, frac_bits: int) -> float:
    return math.ldexp(_untwos(bits), -frac_bits)


def quantization_bound(n_qubits: int, precision: int) -> float:
    """2-norm bound on the codec error of a whole state."""
    return math.sqrt(2 * (1 << n_qubits)) * 2.0 ** -precision


# -- the oracle ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchrodingerOracle(OracleBinding):
    hamiltonian: np.ndarray | None = None
    precision: int = 16
    time_frac_bits: int = 16

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.hamiltonian.shape[0])

    def encode_query(self, psi, tau: float) -> str:
        return encode_query(psi, tau, self.precision, self.time_frac_bits)

    def decode_output(self, bits: str) -> np.ndarray:
        return decode_amplitudes(bits, self.precision)


def schrodinger_oracle_binding(H, epsilon: float, encoding_precision: int,
                               time_frac_bits: int | None = None,
                               identifier: str = "schrodinger") -> OracleBinding:
    """Oracle mapping an encoded (psi, tau) to the encoded evolved state.

    Argument layout: ``2 * 2**n * precision`` state bits followed by
    ``TIME_INT_BITS + time_frac_bits`` time bits.  The workspace charges one
    scrap write per complex multiply-add of the dense Horner evaluation, on
    ``2**n`` accumulator cells.
    """
    H = np.asarray(H, dtype=complex)
    check_hermitian(H)
    n = n_qubits_of(H.shape[0])
    if encoding_precision < 2:
        raise ValueError("encoding precision must be at least 2 bits to hold a normalized state")
    frac = encoding_precision if time_frac_bits is None else time_frac_bits
    state_bits = 2 * (1 << n) * encoding_precision

    def split(x: str):
        if set(x) - {"0", "1"}:
            raise OracleError("schrodinger argument contains blank cells")
        if len(x) != state_bits + TIME_INT_BITS + frac:
            raise OracleError(f"argument of {len(x)} bits, expected {state_bits + TIME_INT_BITS + frac}")
        return decode_amplitudes(x[:state_bits], encoding_precision), decode_time(x[state_bits:], frac)

    def evaluator(x: str) -> str:
        psi, tau = split(x)
        out = evolve(psi, H, tau, epsilon)
        return encode_amplitudes(np.clip(out.real, -1, 1) + 1j * np.clip(out.imag, -1, 1),
                                 encoding_precision)

    def workspace(x: str):
        psi, tau = split(x)
        dim = 1 << n
        for _ in range(taylor_order_for(H, tau, epsilon)):
            for row in range(dim):
                for _col in range(dim):
                    yield row, "1"

    return SchrodingerOracle(identifier, evaluator, state_bits, workspace, "approximate", epsilon,
                             hamiltonian=H, precision=encoding_precision, time_frac_bits=frac)


def encode_query(psi, tau: float, precision: int, time_frac_bits: int | None = None) -> str:
    frac = precision if time_frac_bits is None else time_frac_bits
    return encode_amplitudes(psi, precision) + encode_time(tau, frac)


# -- files ---------------------------------------------------------------------------

def hamiltonian_from_json(doc) -> np.ndarray:
    """Dense Hermitian matrix from ``{n_qubits, entries: [[row, col, re, im], ...]}``.

    Only one triangle is required; mirrored entries must agree.
    """
    n = int(doc["n_qubits"])
    if not 0 <= n <= MAX_QUBITS:
        raise DimensionError(f"n_qubits must be in [0, {MAX_QUBITS}]")
    dim = 1 << n
    H = np.zeros((dim, dim), dtype=complex)
    seen = np.zeros((dim, dim), dtype=bool)
    for row, col, re, im in doc["entries"]:
        row, col = int(row), int(col)
        if not (0 <= row < dim and 0 <= col < dim):
            raise DimensionError(f"entry ({row}, {col}) outside a {dim}x{dim} matrix")
        value = complex(re, im)
        for (a, b), v in (((row, col), value), ((col, row), value.conjugate())):
            if seen[a, b] and H[a, b] != v:
                raise NotHermitianError(abs(H[a, b] - v))
            H[a, b] = v
            seen[a, b] = True
    check_hermitian(H)
    return H


def load_hamiltonian(path) -> np.ndarray:
    with open(path) as fh:
        return hamiltonian_from_json(json.load(fh))


def state_to_json(psi) -> list[list[float]]:
    return [[float(a.real), float(a.imag)] for a in np.asarray(psi, dtype=complex)]


def state_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])
