"""Phase-free Pauli operators in binary symplectic form.

An n-qubit Pauli is stored as two n-bit integers ``x`` and ``z``; bit ``i``
(0-based) refers to qubit ``i + 1``, i.e. the ``i``-th letter of the Pauli
string read left to right.  Overall phases are dropped everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

_LETTERS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_FROM_BITS = {v: k for k, v in _LETTERS.items()}

# tie-break order for single-qubit Pauli types
PAULI_ORDER = {"X": 0, "Y": 1, "Z": 2}


class PauliParseError(ValueError):
    """Raised for malformed Pauli strings; carries the offending position."""

    def __init__(self, text: str, position: int, message: str | None = None):
        self.text = text
        self.position = position
        if message is None:
            message = (
                f"invalid Pauli letter {text[position]!r} at position {position + 1} "
                f"in {text!r} (expected one of I, X, Y, Z)"
            )
        super().__init__(message)


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliOperator:
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a Pauli operator needs at least one qubit")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("bit vectors exceed the qubit count")

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        text = text.strip()
        if not text:
            raise PauliParseError(text, 0, "empty Pauli string")
        x = z = 0
        for i, letter in enumerate(text.upper()):
            try:
                xb, zb = _LETTERS[letter]
            except KeyError:
                raise PauliParseError(text, i) from None
            x |= xb << i
            z |= zb << i
        return cls(len(text), x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(n)

    @classmethod
    def single(cls, n: int, qubit: int, kind: str) -> "PauliOperator":
        """Single-qubit Pauli ``kind`` on ``qubit`` (1-based)."""
        if not 1 <= qubit <= n:
            raise ValueError(f"qubit {qubit} outside 1..{n}")
        xb, zb = _LETTERS[kind.upper()]
        return cls(n, xb << (qubit - 1), zb << (qubit - 1))

    @property
    def x_bits(self) -> tuple[int, ...]:
        return tuple((self.x >> i) & 1 for i in range(self.n))

    @property
    def z_bits(self) -> tuple[int, ...]:
        return tuple((self.z >> i) & 1 for i in range(self.n))

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def letter(self, qubit: int) -> str:
        i = qubit - 1
        return _FROM_BITS[((self.x >> i) & 1, (self.z >> i) & 1)]

    def to_string(self) -> str:
        return "".join(self.letter(q) for q in range(1, self.n + 1))

    def sort_key(self) -> tuple[tuple[int, int], ...]:
        """Sequence of (qubit, type) pairs used for lexicographic tie-breaks."""
        return tuple(
            (q, PAULI_ORDER[self.letter(q)])
            for q in range(1, self.n + 1)
            if self.letter(q) != "I"
        )

    def label(self) -> str:
        if self.weight == 0:
            return "I"
        return "".join(f"{self.letter(q)}{q}" for q, _ in self.sort_key())

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)

    def __str__(self) -> str:
        return self.to_string()


def _check(p: PauliOperator, q: PauliOperator) -> None:
    if p.n != q.n:
        raise DimensionMismatch(f"qubit counts differ: {p.n} vs {q.n}")


def symplectic_product(p: PauliOperator, q: PauliOperator) -> int:
    """Symplectic inner product of ``p`` and ``q`` over GF(2)."""
    _check(p, q)
    return ((p.x & q.z).bit_count() + (p.z & q.x).bit_count()) & 1


def commutes(p: PauliOperator, q: PauliOperator) -> bool:
    return symplectic_product(p, q) == 0


def multiply(p: PauliOperator, q: PauliOperator) -> PauliOperator:
    _check(p, q)
    return PauliOperator(p.n, p.x ^ q.x, p.z ^ q.z)


def parse_pauli(text: str) -> PauliOperator:
    return PauliOperator.from_string(text)


def parse_error_label(label: str, n: int) -> PauliOperator:
    """Parse labels such as ``"X3"`` or ``"Z1"`` into single-qubit Paulis."""
    label = label.strip()
    if len(label) < 2 or label[0].upper() not in PAULI_ORDER or not label[1:].isdigit():
        raise PauliParseError(label, 0, f"invalid elementary error label {label!r}")
    return PauliOperator.single(n, int(label[1:]), label[0])


# --- GF(2) linear algebra on packed (x|z) rows -------------------------------


def pack(p: PauliOperator) -> int:
    return p.x | (p.z << p.n)


def gf2_basis(rows) -> dict[int, int]:
    """Reduced echelon basis of GF(2) row vectors, keyed by pivot bit."""
    basis: dict[int, int] = {}
    for row in rows:
        v = reduce_gf2(row, basis)
        if v:
            pivot = v.bit_length() - 1
            for k in list(basis):
                if (basis[k] >> pivot) & 1:
                    basis[k] ^= v
            basis[pivot] = v
    return basis


def reduce_gf2(v: int, basis: dict[int, int]) -> int:
    for pivot in sorted(basis, reverse=True):
        if (v >> pivot) & 1:
            v ^= basis[pivot]
    return v


def gf2_rank(rows) -> int:
    return len(gf2_basis(rows))
