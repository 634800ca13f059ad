"""Label algebra: spaces, fusion, span decoding, late merge."""
import itertools

import pytest
from hypothesis import given, strategies as st

from nameform.labels import (
    OUTSIDE_ID,
    Bie,
    Fi,
    Fml,
    Fusion,
    LabelScheme,
    NameSpan,
    TokenLabel,
    axis_space,
    bie_for_span,
    build_label_space,
    decode_spans,
    fuse_early,
    labels_for_spans,
    merge_late,
    span_to_labels,
)

EARLY = LabelScheme(Fusion.EARLY, ("BIE", "FML", "FI"))


class TestLabelSpace:
    def test_early_space_has_19_classes(self):
        space = build_label_space(EARLY)
        assert len(space) == 19
        assert space[0] == OUTSIDE_ID
        assert len(set(space)) == 19

    def test_early_space_is_full_product_plus_outside(self):
        # independent enumeration of the cartesian product
        expected = {OUTSIDE_ID} | {
            f"{b.value}_{f.value}_{i.value}"
            for b, f, i in itertools.product(Bie, Fml, Fi)
        }
        assert set(build_label_space(EARLY)) == expected

    @pytest.mark.parametrize(
        "axis,size", [("BIE", 4), ("FML", 4), ("FI", 3)]
    )
    def test_no_fusion_space_sizes(self, axis, size):
        scheme = LabelScheme(Fusion.NO_FUSION, (axis,))
        assert len(build_label_space(scheme)) == size

    def test_no_fusion_fi_space(self):
        scheme = LabelScheme(Fusion.NO_FUSION, ("FI",))
        assert build_label_space(scheme) == [OUTSIDE_ID, "Full", "Initial"]

    def test_two_token_name_form_combinations(self):
        # each token of a two-token name has 3*3*2 = 18 possible forms
        per_token = len(build_label_space(EARLY)) - 1
        assert per_token**2 == 324

    def test_invalid_schemes_rejected(self):
        with pytest.raises(ValueError):
            LabelScheme(Fusion.NO_FUSION, ("BIE", "FML"))
        with pytest.raises(ValueError):
            LabelScheme(Fusion.EARLY, ("BIE",))
        with pytest.raises(ValueError):
            LabelScheme(Fusion.LATE, ("FI",))
        with pytest.raises(ValueError):
            LabelScheme(Fusion.IN_NETWORK, ("FML", "FI"))

    def test_in_network_pairs_span_with_form_view(self):
        scheme = LabelScheme(Fusion.IN_NETWORK, ("BIE", "FI"))
        space = build_label_space(scheme)
        assert space[0] == OUTSIDE_ID
        assert len(space) == len(set(space))


class TestFuseEarly:
    def test_canonical_examples(self):
        assert fuse_early(Bie.BEGIN, Fml.FIRST, Fi.FULL) == "Begin_First_Full"
        assert fuse_early(Bie.END, Fml.LAST, Fi.FULL) == "End_Last_Full"

    def test_injective_over_all_18(self):
        outputs = {
            fuse_early(b, f, i) for b, f, i in itertools.product(Bie, Fml, Fi)
        }
        assert len(outputs) == 18

    def test_parse_round_trip(self):
        for b, f, i in itertools.product(Bie, Fml, Fi):
            label = TokenLabel.name(b, f, i)
            assert TokenLabel.parse(label.identifier()) == label
        assert TokenLabel.parse(OUTSIDE_ID) == TokenLabel.outside()

    def test_partial_axes_rejected(self):
        with pytest.raises(ValueError):
            TokenLabel(bie=Bie.BEGIN)


def _name(b, f="Last", i="Full"):
    return TokenLabel.parse(f"{b}_{f}_{i}")


class TestDecodeSpans:
    def test_two_token_name(self):
        labels = [_name("Begin", "First"), _name("End", "Last"), TokenLabel.outside()]
        spans = decode_spans(labels)
        assert [(s.start_token, s.end_token) for s in spans] == [(0, 1)]
        assert spans[0].forms == ((Fml.FIRST, Fi.FULL), (Fml.LAST, Fi.FULL))

    def test_all_outside(self):
        assert decode_spans([TokenLabel.outside()] * 5) == []

    def test_four_token_particle_name(self):
        labels = [
            _name("Begin", "First"),
            _name("Inside", "Last"),
            _name("Inside", "Last"),
            _name("End", "Last"),
        ]
        spans = decode_spans(labels)
        assert [(s.start_token, s.end_token) for s in spans] == [(0, 3)]

    def test_abutting_names_split_at_begin(self):
        labels = [
            _name("Begin", "First"),
            _name("End", "Last"),
            _name("Begin", "First"),
            _name("End", "Last"),
        ]
        spans = decode_spans(labels)
        assert [(s.start_token, s.end_token) for s in spans] == [(0, 1), (2, 3)]

    @given(
        st.lists(
            st.tuples(st.integers(0, 30), st.integers(1, 4)), min_size=0, max_size=5
        )
    )
    def test_round_trip_on_non_adjacent_spans(self, raw):
        # lay spans out left to right with a one-token gap between them
        spans = []
        cursor = 0
        for gap, length in raw:
            start = cursor + gap + 1
            spans.append(NameSpan(start, start + length - 1))
            cursor = start + length
        n_tokens = cursor + 1
        labels = labels_for_spans(spans, n_tokens)
        decoded = decode_spans(labels)
        assert [(s.start_token, s.end_token) for s in decoded] == [
            (s.start_token, s.end_token) for s in spans
        ]


class TestBieForSpan:
    def test_shapes(self):
        assert bie_for_span(1) == [Bie.BEGIN]
        assert bie_for_span(2) == [Bie.BEGIN, Bie.END]
        assert bie_for_span(4) == [Bie.BEGIN, Bie.INSIDE, Bie.INSIDE, Bie.END]

    def test_span_to_labels_uses_forms(self):
        span = NameSpan(0, 1, ((Fml.FIRST, Fi.FULL), (Fml.LAST, Fi.INITIAL)))
        got = [l.identifier() for l in span_to_labels(span)]
        assert got == ["Begin_First_Full", "End_Last_Initial"]


class TestMergeLate:
    def test_unanimous(self):
        seqs = [["Begin", "End", OUTSIDE_ID]] + [["First", "Last", OUTSIDE_ID]] + [
            ["Full", "Full", OUTSIDE_ID]
        ]
        spans = merge_late(seqs)
        assert [(s.start_token, s.end_token) for s in spans] == [(0, 1)]

    def test_union_rule_extends_span(self):
        # BIE marks {0,1}, FML marks {1,2}: union covers {0,1,2}
        bie = ["Begin", "End", OUTSIDE_ID]
        fml = [OUTSIDE_ID, "First", "Last"]
        spans = merge_late([bie, fml])
        assert [(s.start_token, s.end_token) for s in spans] == [(0, 2)]

    def test_nothing_marked(self):
        assert merge_late([[OUTSIDE_ID] * 4, [OUTSIDE_ID] * 4]) == []

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            merge_late([[OUTSIDE_ID], [OUTSIDE_ID, OUTSIDE_ID]])

    @given(
        st.integers(1, 20).flatmap(
            lambda n: st.tuples(
                st.just(n),
                st.lists(
                    st.lists(st.booleans(), min_size=n, max_size=n),
                    min_size=1,
                    max_size=3,
                ),
            )
        )
    )
    def test_spans_are_connected_components_of_union(self, case):
        n, marks = case
        seqs = [
            ["Begin" if m else OUTSIDE_ID for m in axis] for axis in marks
        ]
        union = [any(axis[i] for axis in marks) for i in range(n)]
        # independent oracle: connected components of the union mask
        expected = []
        i = 0
        while i < n:
            if union[i]:
                j = i
                while j + 1 < n and union[j + 1]:
                    j += 1
                expected.append((i, j))
                i = j + 1
            else:
                i += 1
        got = [(s.start_token, s.end_token) for s in merge_late(seqs)]
        assert got == expected
