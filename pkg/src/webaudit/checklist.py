"""Security checklist registry and the likelihood x impact risk matrix.

The default checklist ships as a pipe-separated text file inside the package
(``data/default_checklist.txt``). One parameter per line::

    id|category|subcategory|name|likelihood|impact|mode|polarity|kind|accepted_values[|risk]

``accepted_values`` is a comma-separated list (empty for Boolean rows). The
optional trailing ``risk`` column is not trusted: it is re-derived from the
likelihood and impact and a mismatch is a :class:`ChecklistConsistencyError`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

__all__ = [
    "Category",
    "Checklist",
    "ChecklistConsistencyError",
    "ChecklistError",
    "ChecklistParseError",
    "ImpactLevel",
    "Kind",
    "LikelihoodLevel",
    "Mode",
    "ParameterSpec",
    "Polarity",
    "RiskLevel",
    "default_checklist",
    "dump_checklist",
    "load_checklist",
    "load_checklist_file",
    "risk_level",
]


class ChecklistError(ValueError):
    """Base class for checklist problems."""


class ChecklistParseError(ChecklistError):
    """The document does not follow the line format."""


class ChecklistConsistencyError(ChecklistError):
    """The document parses but violates a checklist invariant."""


def _norm(text: str) -> str:
    return re.sub(r"[\s_\-]", "", text).lower()


class _Ordinal(enum.Enum):
    """Enum whose value is its 1-based ordinal, parsed leniently by name."""

    @property
    def ordinal(self) -> int:
        return self.value

    @property
    def label(self) -> str:
        return re.sub(r"(?<=[a-z])(?=[A-Z])", " ", self.name)

    @classmethod
    def parse(cls, text: str):
        key = _norm(text)
        for member in cls:
            if _norm(member.name) == key:
                return member
        raise ChecklistParseError(f"unknown {cls.__name__} {text!r}")

    def __lt__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.value < other.value

    def __le__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.value <= other.value

    def __gt__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.value > other.value

    def __ge__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.value >= other.value


class LikelihoodLevel(_Ordinal):
    Rare = 1
    Unlikely = 2
    Moderate = 3
    Likely = 4
    AlmostCertain = 5


class ImpactLevel(_Ordinal):
    Insignificant = 1
    Minor = 2
    Significant = 3
    Major = 4
    Severe = 5


class RiskLevel(_Ordinal):
    VeryLow = 1
    Low = 2
    Medium = 3
    High = 4
    VeryHigh = 5
    Extreme = 6

    @property
    def rank(self) -> int:
        return self.value


class Category(enum.Enum):
    """The six checklist domains; value is the expected parameter count."""

    AuthenticationSecurity = ("Authentication Security", 11)
    InputValidation = ("Input Validation & Protection Against Injection Attacks", 10)
    SessionSecurity = ("Session Security", 8)
    SecureStorage = ("Secure Storage", 2)
    ErrorHandling = ("Error Handling & Information Disclosure", 5)
    HttpSecurityHeaders = ("HTTP Security Headers", 12)

    @property
    def title(self) -> str:
        return self.value[0]

    @property
    def expected_parameter_count(self) -> int:
        return self.value[1]

    @classmethod
    def parse(cls, text: str) -> "Category":
        key = _norm(text)
        for member in cls:
            if key in (_norm(member.name), _norm(member.title)):
                return member
        raise ChecklistParseError(f"unknown category {text!r}")


class Mode(enum.Enum):
    Dynamic = "Dynamic"
    Static = "Static"
    Manual = "Manual"


class Polarity(enum.Enum):
    DesiredYes = "DesiredYes"
    DesiredNo = "DesiredNo"


class Kind(enum.Enum):
    Boolean = "Boolean"
    Categorical = "Categorical"


def _parse_plain_enum(enum_cls, text: str):
    key = _norm(text)
    for member in enum_cls:
        if _norm(member.value) == key:
            return member
    raise ChecklistParseError(f"unknown {enum_cls.__name__} {text!r}")


# Product thresholds: upper bound of each band, VeryLow..VeryHigh; beyond is Extreme.
_RISK_BANDS = ((2, RiskLevel.VeryLow), (5, RiskLevel.Low), (9, RiskLevel.Medium),
               (12, RiskLevel.High), (19, RiskLevel.VeryHigh))


def risk_level(likelihood: LikelihoodLevel, impact: ImpactLevel) -> RiskLevel:
    """Classify ``likelihood.ordinal * impact.ordinal`` into a risk band.

    >>> risk_level(LikelihoodLevel.AlmostCertain, ImpactLevel.Major)
    <RiskLevel.Extreme: 6>
    >>> risk_level(LikelihoodLevel.Rare, ImpactLevel.Severe)
    <RiskLevel.Low: 2>
    """
    product = likelihood.ordinal * impact.ordinal
    for upper, level in _RISK_BANDS:
        if product <= upper:
            return level
    return RiskLevel.Extreme


@dataclass(frozen=True)
class ParameterSpec:
    id: str
    category: Category
    subcategory: str
    name: str
    likelihood: LikelihoodLevel
    impact: ImpactLevel
    mode: Mode
    polarity: Polarity = Polarity.DesiredYes
    kind: Kind = Kind.Boolean
    accepted_values: tuple[str, ...] = ()

    @property
    def risk(self) -> RiskLevel:
        return risk_level(self.likelihood, self.impact)


@dataclass(frozen=True)
class Checklist:
    parameters: tuple[ParameterSpec, ...]
    version: str = "1.0"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "_index", {p.id: p for p in self.parameters})

    def __len__(self) -> int:
        return len(self.parameters)

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.parameters)

    def __contains__(self, parameter_id: object) -> bool:
        return parameter_id in self._index

    def __getitem__(self, parameter_id: str) -> ParameterSpec:
        try:
            return self._index[parameter_id]
        except KeyError:
            raise KeyError(f"unknown parameter id {parameter_id!r}") from None

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.parameters]

    def by_mode(self, mode: Mode) -> list[ParameterSpec]:
        return [p for p in self.parameters if p.mode is mode]

    def by_category(self, category: Category) -> list[ParameterSpec]:
        return [p for p in self.parameters if p.category is category]

    def find(self, name: str) -> ParameterSpec:
        """Look a parameter up by id or (case-insensitive) display name."""
        if name in self._index:
            return self._index[name]
        key = name.strip().lower()
        for p in self.parameters:
            if p.name.lower() == key:
                return p
        raise KeyError(f"no parameter named {name!r}")

    def validate(self, strict_counts: bool = True) -> None:
        seen: set[str] = set()
        for p in self.parameters:
            if p.id in seen:
                raise ChecklistConsistencyError(f"duplicate parameter id {p.id!r}")
            seen.add(p.id)
            if p.kind is Kind.Boolean and p.accepted_values:
                raise ChecklistConsistencyError(f"{p.id}: Boolean parameter with accepted values")
        if strict_counts:
            for cat in Category:
                n = len(self.by_category(cat))
                if n != cat.expected_parameter_count:
                    raise ChecklistConsistencyError(
                        f"category {cat.name} has {n} parameters, expected "
                        f"{cat.expected_parameter_count}")


_FIELDS = 10
_VERSION_RE = re.compile(r"^#\s*version\s*:\s*(\S+)\s*$", re.IGNORECASE)


def _parse_row(line: str, lineno: int) -> tuple[ParameterSpec, str | None]:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) not in (_FIELDS, _FIELDS + 1):
        raise ChecklistParseError(
            f"line {lineno}: expected {_FIELDS} or {_FIELDS + 1} fields, got {len(parts)}")
    pid, cat, sub, name, lik, imp, mode, pol, kind, accepted = parts[:_FIELDS]
    if not pid or not name:
        raise ChecklistParseError(f"line {lineno}: empty id or name")
    try:
        spec = ParameterSpec(
            id=pid,
            category=Category.parse(cat),
            subcategory=sub,
            name=name,
            likelihood=LikelihoodLevel.parse(lik),
            impact=ImpactLevel.parse(imp),
            mode=_parse_plain_enum(Mode, mode),
            polarity=_parse_plain_enum(Polarity, pol),
            kind=_parse_plain_enum(Kind, kind),
            accepted_values=tuple(v.strip() for v in accepted.split(",") if v.strip()),
        )
    except ChecklistParseError as exc:
        raise ChecklistParseError(f"line {lineno}: {exc}") from None
    claimed = parts[_FIELDS] if len(parts) > _FIELDS and parts[_FIELDS] else None
    return spec, claimed


def load_checklist(source: str, *, strict_counts: bool = True) -> Checklist:
    """Parse and validate a checklist document."""
    params: list[ParameterSpec] = []
    version = "unversioned"
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _VERSION_RE.match(line)
            if m:
                version = m.group(1)
            continue
        spec, claimed = _parse_row(line, lineno)
        if claimed is not None:
            try:
                stated = RiskLevel.parse(claimed)
            except ChecklistParseError as exc:
                raise ChecklistParseError(f"line {lineno}: {exc}") from None
            if stated is not spec.risk:
                raise ChecklistConsistencyError(
                    f"line {lineno}: {spec.id} states risk {stated.name} but "
                    f"{spec.likelihood.name} x {spec.impact.name} gives {spec.risk.name}")
        params.append(spec)
    if not params:
        raise ChecklistParseError("checklist document has no parameter rows")
    checklist = Checklist(tuple(params), version)
    checklist.validate(strict_counts=strict_counts)
    return checklist


def load_checklist_file(path: str | Path, *, strict_counts: bool = True) -> Checklist:
    return load_checklist(Path(path).read_text(encoding="utf-8"), strict_counts=strict_counts)


def dump_checklist(checklist: Checklist) -> str:
    lines = [
        "# Fields: id|category|subcategory|name|likelihood|impact|mode|polarity|kind|accepted_values|risk",
        f"# version: {checklist.version}",
    ]
    for p in checklist:
        lines.append("|".join([
            p.id, p.category.name, p.subcategory, p.name, p.likelihood.name,
            p.impact.name, p.mode.value, p.polarity.value, p.kind.value,
            ",".join(p.accepted_values), p.risk.name,
        ]))
    return "\n".join(lines) + "\n"


_DEFAULT: Checklist | None = None


def default_checklist() -> Checklist:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("webaudit").joinpath("data/default_checklist.txt").read_text("utf-8")
        _DEFAULT = load_checklist(text)
    return _DEFAULT


def iter_cells() -> Iterable[tuple[LikelihoodLevel, ImpactLevel, RiskLevel]]:
    """All 25 cells of the matrix, likelihood-major."""
    for lik in LikelihoodLevel:
        for imp in ImpactLevel:
            yield lik, imp, risk_level(lik, imp)
