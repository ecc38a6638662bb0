"""Stabilizer codes, syndromes, elementary error models and decoder tables."""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .pauli import (
    PAULI_ORDER,
    DimensionMismatch,
    PauliOperator,
    PauliParseError,
    commutes,
    gf2_basis,
    pack,
    parse_error_label,
    reduce_gf2,
)

log = logging.getLogger(__name__)

MAX_GENERATORS = 20


class CodeError(ValueError):
    pass


class InconsistentDecoder(RuntimeError):
    pass


@dataclass(frozen=True)
class Syndrome:
    """Bit vector; ``bits[m]`` is 1 iff the error anticommutes with generator m+1."""

    bits: tuple[int, ...]

    @classmethod
    def from_index(cls, index: int, g: int) -> "Syndrome":
        return cls(tuple((index >> m) & 1 for m in range(g)))

    @property
    def index(self) -> int:
        # little-endian: generator 1 is the least significant bit
        return sum(b << m for m, b in enumerate(self.bits))

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def __xor__(self, other: "Syndrome") -> "Syndrome":
        if len(self.bits) != len(other.bits):
            raise DimensionMismatch("syndrome lengths differ")
        return Syndrome(tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


class StabilizerCode:
    """An [[n, k]] stabilizer code given by n - k independent commuting generators."""

    def __init__(self, name: str, n: int, k: int, generators, declared_distance: int | None = None):
        gens = []
        for g in generators:
            if isinstance(g, str):
                try:
                    g = PauliOperator.from_string(g)
                except PauliParseError as exc:
                    raise CodeError(f"generator {len(gens) + 1}: {exc}") from exc
            if g.n != n:
                raise CodeError(f"generator {len(gens) + 1} acts on {g.n} qubits, code has n={n}")
            gens.append(g)
        if not 0 <= k < n:
            raise CodeError(f"need 0 <= k < n, got n={n}, k={k}")
        if len(gens) != n - k:
            raise CodeError(f"expected n-k={n - k} generators, got {len(gens)}")
        for (a, p), (b, q) in itertools.combinations(enumerate(gens, 1), 2):
            if not commutes(p, q):
                raise CodeError(f"generators S{a} and S{b} anticommute")
        self._basis = gf2_basis(pack(g) for g in gens)
        if len(self._basis) != len(gens):
            raise CodeError("generators are not independent")
        self.name = name
        self.n = n
        self.k = k
        self.generators: tuple[PauliOperator, ...] = tuple(gens)
        self.declared_distance = declared_distance

    @property
    def num_generators(self) -> int:
        return self.n - self.k

    @property
    def num_syndromes(self) -> int:
        return 1 << self.num_generators

    def syndrome_index(self, p: PauliOperator) -> int:
        if p.n != self.n:
            raise DimensionMismatch(f"operator has {p.n} qubits, code has {self.n}")
        s = 0
        for m, g in enumerate(self.generators):
            if ((p.x & g.z).bit_count() + (p.z & g.x).bit_count()) & 1:
                s |= 1 << m
        return s

    def syndrome(self, p: PauliOperator) -> Syndrome:
        return Syndrome.from_index(self.syndrome_index(p), self.num_generators)

    def in_stabilizer_group(self, p: PauliOperator) -> bool:
        """Membership up to phase, via reduction against the generator row space."""
        if p.n != self.n:
            raise DimensionMismatch(f"operator has {p.n} qubits, code has {self.n}")
        return reduce_gf2(pack(p), self._basis) == 0

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "generators": [g.to_string() for g in self.generators],
        }
        if self.declared_distance is not None:
            d["distance"] = self.declared_distance
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StabilizerCode":
        missing = {"name", "n", "k", "generators"} - set(d)
        if missing:
            raise CodeError(f"code definition missing keys: {sorted(missing)}")
        unknown = set(d) - {"name", "n", "k", "generators", "distance"}
        if unknown:
            raise CodeError(f"unknown keys in code definition: {sorted(unknown)}")
        return cls(d["name"], int(d["n"]), int(d["k"]), d["generators"], d.get("distance"))

    def __repr__(self) -> str:
        return f"StabilizerCode({self.name!r}, [[{self.n},{self.k}]])"


def syndrome(code: StabilizerCode, p: PauliOperator) -> Syndrome:
    return code.syndrome(p)


def load_code(path) -> StabilizerCode:
    with open(path, encoding="utf-8") as fh:
        return StabilizerCode.from_dict(json.load(fh))


# Generator lists as printed in the figure captions of the source analysis.
_REGISTRY = {
    "bit_flip": dict(
        name="bit_flip", n=3, k=1, generators=["ZZI", "IZZ"],
        description="3-qubit repetition code against bit flips",
        default_model="x",
    ),
    "five_qubit": dict(
        name="five_qubit", n=5, k=1, generators=["IXZZX", "XIXZZ", "ZXIXZ", "ZZXIX"],
        distance=3, description="perfect [[5,1,3]] code", default_model="xyz",
    ),
    "steane": dict(
        name="steane", n=7, k=1,
        generators=["ZIZIZIZ", "IZZIIZZ", "IIIZZZZ", "XIXIXIX", "IXXIIXX", "IIIXXXX"],
        distance=3, description="Steane [[7,1,3]] CSS code", default_model="xz",
    ),
}

_ALIASES = {"bitflip": "bit_flip", "repetition": "bit_flip", "513": "five_qubit",
            "[[5,1,3]]": "five_qubit", "[[7,1,3]]": "steane"}


def registry_names() -> list[str]:
    return list(_REGISTRY)


def registry_entry(name: str) -> dict:
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _REGISTRY:
        raise CodeError(f"unknown code {name!r}; known: {', '.join(_REGISTRY)}")
    return dict(_REGISTRY[key])


def get_code(name: str) -> StabilizerCode:
    e = registry_entry(name)
    return StabilizerCode(e["name"], e["n"], e["k"], e["generators"], e.get("distance"))


@dataclass(frozen=True)
class ErrorModel:
    """Ordered single-qubit elementary errors; index j is the position in ``errors``."""

    errors: tuple[PauliOperator, ...]

    def __post_init__(self):
        if self.errors:
            n = self.errors[0].n
            for e in self.errors:
                if e.n != n:
                    raise DimensionMismatch("elementary errors act on different qubit counts")
                if e.weight != 1:
                    raise CodeError(f"elementary error {e.label()} is not single-qubit")

    @classmethod
    def from_kinds(cls, n: int, kinds: str) -> "ErrorModel":
        kinds = kinds.upper()
        bad = set(kinds) - set(PAULI_ORDER)
        if bad or not kinds:
            raise CodeError(f"invalid error kinds {kinds!r}")
        ordered = sorted(set(kinds), key=PAULI_ORDER.get)
        return cls(tuple(PauliOperator.single(n, q, t) for q in range(1, n + 1) for t in ordered))

    @classmethod
    def from_labels(cls, n: int, labels) -> "ErrorModel":
        return cls(tuple(parse_error_label(s, n) for s in labels))

    @property
    def size(self) -> int:
        return len(self.errors)

    def labels(self) -> list[str]:
        return [e.label() for e in self.errors]

    def kind(self, j: int) -> str:
        e = self.errors[j]
        return e.letter(e.sort_key()[0][0])

    def check_detectable(self, code: StabilizerCode) -> None:
        for e in self.errors:
            if e.n != code.n:
                raise DimensionMismatch("error model and code qubit counts differ")
            if code.syndrome_index(e) == 0:
                raise CodeError(f"elementary error {e.label()} commutes with every generator")


def default_error_model(code: StabilizerCode) -> ErrorModel:
    try:
        kinds = registry_entry(code.name)["default_model"]
    except CodeError:
        kinds = "xz"
    return ErrorModel.from_kinds(code.n, kinds)


@dataclass(frozen=True)
class SyndromeRecord:
    syndrome: Syndrome
    representative: PauliOperator | None
    weight: int | None
    factors: tuple[int, ...] | None  # elementary-error indices whose product is the representative
    correctable: bool


@dataclass(frozen=True)
class Tie:
    syndrome: int
    chosen: PauliOperator
    other: PauliOperator
    equivalent: bool  # chosen * other lies in the stabilizer group


@dataclass
class CorrectabilityTable:
    code: StabilizerCode
    model: ErrorModel
    max_weight: int
    records: dict[int, SyndromeRecord]
    transitions: dict[tuple[int, int], bool]
    ties: list[Tie] = field(default_factory=list)
    level_counts: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def ambiguous(self) -> list[Tie]:
        return [t for t in self.ties if not t.equivalent]

    def decoder(self, s: int) -> PauliOperator | None:
        return self.records[s].representative

    def correctable_syndromes(self) -> list[int]:
        return [s for s, r in sorted(self.records.items()) if r.correctable]

    def is_correctable(self, p: PauliOperator) -> bool:
        rep = self.decoder(self.code.syndrome_index(p))
        return rep is not None and self.code.in_stabilizer_group(rep * p)

    def transition_correctable(self, s: int, j: int) -> bool:
        return self.transitions[(s, j)]


def classify(code: StabilizerCode, model: ErrorModel, max_weight: int,
             strict: bool = False) -> CorrectabilityTable:
    """Minimal-weight decoder table built by enumerating elementary-error products.

    All products of up to ``max_weight`` distinct elementary errors are
    enumerated.  For each syndrome the product with the smallest Pauli weight
    (then fewest factors, then lexicographically smallest (qubit, X<Y<Z)
    sequence) becomes the decoder's correction.  A product is correctable iff
    it equals the correction for its syndrome up to a stabilizer.

    Equal-weight minimal candidates that differ by a logical operator are
    recorded in ``ties`` (``equivalent=False``) and logged; with
    ``strict=True`` they raise :class:`InconsistentDecoder` instead.
    """
    if max_weight < 1:
        raise ValueError("max_weight must be >= 1")
    if code.num_generators > MAX_GENERATORS:
        raise CodeError(f"n-k={code.num_generators} exceeds the enumeration cap of {MAX_GENERATORS}")
    model.check_detectable(code)

    best: dict[int, tuple[tuple, PauliOperator, tuple[int, ...]]] = {}
    ties: list[Tie] = []
    products: list[tuple[int, PauliOperator]] = []
    identity = PauliOperator.identity(code.n)
    best[0] = ((0, 0, ()), identity, ())
    top = min(max_weight, model.size)
    for level in range(1, top + 1):
        for combo in itertools.combinations(range(model.size), level):
            p = identity
            for j in combo:
                p = p * model.errors[j]
            products.append((level, p))
            s = code.syndrome_index(p)
            key = (p.weight, level, p.sort_key())
            cur = best.get(s)
            if cur is None:
                best[s] = (key, p, combo)
                continue
            if p == cur[1]:
                continue
            if p.weight == cur[0][0]:
                eq = code.in_stabilizer_group(p * cur[1])
                tie = Tie(s, min(p, cur[1], key=lambda q: q.sort_key()),
                          max(p, cur[1], key=lambda q: q.sort_key()), eq)
                if tie not in ties:
                    ties.append(tie)
            if key < cur[0]:
                best[s] = (key, p, combo)

    for t in ties:
        if not t.equivalent:
            msg = (f"syndrome {t.syndrome}: minimal representatives {t.chosen.label()} and "
                   f"{t.other.label()} are logically inequivalent")
            if strict:
                raise InconsistentDecoder(msg)
            log.warning(msg)

    g = code.num_generators
    records = {}
    for s in range(code.num_syndromes):
        if s in best:
            key, rep, combo = best[s]
            records[s] = SyndromeRecord(Syndrome.from_index(s, g), rep, rep.weight, combo, True)
        else:
            records[s] = SyndromeRecord(Syndrome.from_index(s, g), None, None, None, False)

    table = CorrectabilityTable(code, model, max_weight, records, {}, ties)
    for s, rec in records.items():
        if rec.correctable:
            for j, e in enumerate(model.errors):
                table.transitions[(s, j)] = table.is_correctable(e * rec.representative)
    counts: dict[int, list[int]] = {}
    for level, p in products:
        c = counts.setdefault(level, [0, 0])
        c[0] += table.is_correctable(p)
        c[1] += 1
    table.level_counts = {k: (v[0], v[1]) for k, v in counts.items()}
    return table


def code_from_config(spec) -> StabilizerCode:
    """Resolve a registry name, a path to a JSON definition, or an inline dict."""
    if isinstance(spec, dict):
        return StabilizerCode.from_dict(spec)
    if isinstance(spec, str) and spec.endswith(".json") and Path(spec).exists():
        return load_code(spec)
    return get_code(spec)


def model_from_config(code: StabilizerCode, spec) -> ErrorModel:
    if spec is None:
        return default_error_model(code)
    if isinstance(spec, str):
        return ErrorModel.from_kinds(code.n, spec)
    return ErrorModel.from_labels(code.n, spec)
