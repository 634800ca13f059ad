"""Three-axis name-form label algebra.

Every name token carries three axes: its position in the name span
(Begin/Inside/End), its role (First/Middle/Last), and its surface form
(Full word or Initial).  Non-name tokens carry the single Outside class.
Fused class identifiers are rendered as ``"Begin_First_Full"`` style
strings; these exact strings appear in corpus files and service payloads.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

OUTSIDE_ID = "Outside"


class Bie(Enum):
    BEGIN = "Begin"
    INSIDE = "Inside"
    END = "End"


class Fml(Enum):
    FIRST = "First"
    MIDDLE = "Middle"
    LAST = "Last"


class Fi(Enum):
    FULL = "Full"
    INITIAL = "Initial"


AXIS_VALUES = {
    "BIE": tuple(Bie),
    "FML": tuple(Fml),
    "FI": tuple(Fi),
}


@dataclass(frozen=True)
class TokenLabel:
    """Label of one token: either Outside (all axes None) or a full triple."""

    bie: Bie | None = None
    fml: Fml | None = None
    fi: Fi | None = None

    def __post_init__(self) -> None:
        axes = (self.bie, self.fml, self.fi)
        if any(a is None for a in axes) and any(a is not None for a in axes):
            raise ValueError("name label requires all three axes; Outside carries none")

    @staticmethod
    def outside() -> "TokenLabel":
        return TokenLabel()

    @staticmethod
    def name(bie: Bie, fml: Fml, fi: Fi) -> "TokenLabel":
        return TokenLabel(bie, fml, fi)

    @property
    def is_name(self) -> bool:
        return self.bie is not None

    def identifier(self) -> str:
        if not self.is_name:
            return OUTSIDE_ID
        return fuse_early(self.bie, self.fml, self.fi)

    @staticmethod
    def parse(identifier: str) -> "TokenLabel":
        if identifier == OUTSIDE_ID:
            return TokenLabel.outside()
        parts = identifier.split("_")
        if len(parts) != 3:
            raise ValueError(f"malformed label identifier: {identifier!r}")
        return TokenLabel(Bie(parts[0]), Fml(parts[1]), Fi(parts[2]))


def fuse_early(bie: Bie, fml: Fml, fi: Fi) -> str:
    """Fused class identifier; injective over the 18 axis combinations."""
    return f"{bie.value}_{fml.value}_{fi.value}"


class Fusion(Enum):
    NO_FUSION = "no_fusion"
    EARLY = "early"
    LATE = "late"
    IN_NETWORK = "in_network"


@dataclass(frozen=True)
class LabelScheme:
    """Which axes a model is supervised on and how they are combined."""

    fusion: Fusion
    axes: tuple[str, ...]

    def __post_init__(self) -> None:
        unknown = [a for a in self.axes if a not in AXIS_VALUES]
        if unknown:
            raise ValueError(f"unknown axes: {unknown}")
        if len(set(self.axes)) != len(self.axes):
            raise ValueError("duplicate axes")
        n = len(self.axes)
        if self.fusion is Fusion.NO_FUSION and n != 1:
            raise ValueError("no-fusion scheme names exactly one axis")
        if self.fusion is Fusion.EARLY and n != 3:
            raise ValueError("early fusion uses all three axes")
        if self.fusion is Fusion.LATE and n < 2:
            raise ValueError("late fusion needs at least two axis models")
        if self.fusion is Fusion.IN_NETWORK:
            if n != 2 or self.axes[0] != "BIE":
                raise ValueError("in-network fusion pairs the BIE span view with one form view")


def axis_space(axis: str) -> list[str]:
    """Outside plus the axis values, in declaration order."""
    return [OUTSIDE_ID] + [v.value for v in AXIS_VALUES[axis]]


def build_label_space(scheme: LabelScheme) -> list[str]:
    """Ordered, duplicate-free class identifiers for a scheme.

    Early fusion enumerates Outside plus the BIE x FML x FI product (19
    classes).  No-fusion yields Outside plus the single axis.  Late and
    in-network schemes train per-axis models; their reporting space is the
    union of the per-axis spaces with Outside first.
    """
    if scheme.fusion is Fusion.EARLY:
        return [OUTSIDE_ID] + [
            fuse_early(b, f, i) for b in Bie for f in Fml for i in Fi
        ]
    if scheme.fusion is Fusion.NO_FUSION:
        return axis_space(scheme.axes[0])
    space = [OUTSIDE_ID]
    for axis in scheme.axes:
        space.extend(v.value for v in AXIS_VALUES[axis])
    return space


@dataclass(frozen=True)
class NameSpan:
    """Inclusive token range of one name, optionally with per-token forms."""

    start_token: int
    end_token: int
    forms: tuple[tuple[Fml, Fi], ...] | None = None

    def __post_init__(self) -> None:
        if self.start_token > self.end_token:
            raise ValueError("span start after end")
        if self.forms is not None and len(self.forms) != self.end_token - self.start_token + 1:
            raise ValueError("forms length does not match span length")

    @property
    def length(self) -> int:
        return self.end_token - self.start_token + 1


def bie_for_span(length: int) -> list[Bie]:
    """BIE sequence for a span of the given token count.

    Single-token names take Begin: the begin marker doubles as the span
    boundary when begin and end coincide.
    """
    if length < 1:
        raise ValueError("span must cover at least one token")
    if length == 1:
        return [Bie.BEGIN]
    return [Bie.BEGIN] + [Bie.INSIDE] * (length - 2) + [Bie.END]


def span_to_labels(span: NameSpan) -> list[TokenLabel]:
    """Per-token labels for one span; forms default to (Last, Full)."""
    forms = span.forms or tuple((Fml.LAST, Fi.FULL) for _ in range(span.length))
    return [
        TokenLabel(b, f, i)
        for b, (f, i) in zip(bie_for_span(span.length), forms)
    ]


def labels_for_spans(spans: Iterable[NameSpan], n_tokens: int) -> list[TokenLabel]:
    """Dense label sequence with Outside everywhere no span covers."""
    labels = [TokenLabel.outside()] * n_tokens
    for span in spans:
        if span.end_token >= n_tokens:
            raise ValueError("span exceeds token count")
        for offset, label in enumerate(span_to_labels(span)):
            labels[span.start_token + offset] = label
    return labels


def decode_spans(labels: Sequence[TokenLabel]) -> list[NameSpan]:
    """Maximal contiguous runs of name labels, split at interior Begins.

    Outside breaks a span; a fresh Begin inside a run also starts a new
    span, so abutting names without an intervening Outside stay distinct.
    """
    spans: list[NameSpan] = []
    start: int | None = None
    forms: list[tuple[Fml, Fi]] = []

    def close(end: int) -> None:
        nonlocal start, forms
        if start is not None:
            spans.append(NameSpan(start, end, tuple(forms)))
            start, forms = None, []

    for idx, label in enumerate(labels):
        if not label.is_name:
            close(idx - 1)
            continue
        if start is not None and label.bie is Bie.BEGIN:
            close(idx - 1)
        if start is None:
            start = idx
        forms.append((label.fml, label.fi))
    close(len(labels) - 1)
    return spans


def axis_view(identifier: str, axis: str) -> str:
    """Project a fused identifier onto one axis ('Outside' stays Outside)."""
    label = TokenLabel.parse(identifier)
    if not label.is_name:
        return OUTSIDE_ID
    value = {"BIE": label.bie, "FML": label.fml, "FI": label.fi}[axis]
    return value.value


def combine_views(bie_id: str, form_id: str, form_axis: str) -> TokenLabel:
    """Rebuild a full label from the span view plus one form view.

    The span view decides whether the token is a name; missing axes fall
    back to the most common values (Last, Full).
    """
    if bie_id == OUTSIDE_ID:
        return TokenLabel.outside()
    bie = Bie(bie_id)
    fml, fi = Fml.LAST, Fi.FULL
    if form_id != OUTSIDE_ID:
        if form_axis == "FML":
            fml = Fml(form_id)
        elif form_axis == "FI":
            fi = Fi(form_id)
        else:
            raise ValueError(f"unknown form axis: {form_axis}")
    return TokenLabel(bie, fml, fi)


def merge_late(predictions: Sequence[Sequence[str]]) -> list[NameSpan]:
    """Late-fusion merge: union per-axis name tokens, then take runs as spans.

    Each sequence holds class identifiers from one axis model; any
    non-Outside vote makes the token a name token.
    """
    if not predictions:
        return []
    n = len(predictions[0])
    for seq in predictions:
        if len(seq) != n:
            raise ValueError("per-axis prediction lengths differ")
    is_name = [any(seq[i] != OUTSIDE_ID for seq in predictions) for i in range(n)]
    spans = []
    start = None
    for i, flag in enumerate(is_name):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            spans.append(NameSpan(start, i - 1))
            start = None
    if start is not None:
        spans.append(NameSpan(start, n - 1))
    return spans
