"""Histogram-to-PMF construction and weight table handling."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opstab.pmf import (
    AlignedPmfSet,
    PmfError,
    PmfVector,
    Vocabulary,
    WeightTable,
    align_vocabulary,
    build_dynamic_tensors,
    build_static_tensors,
    to_structural_pmf,
    to_weighted_pmf,
)

from naive_reference import naive_structural_pmf, naive_weighted_pmf

histograms = st.dictionaries(
    st.sampled_from(["POP_TOP", "LOAD_FAST", "BUILD_LIST", "FOR_ITER", "RETURN_VALUE"]),
    st.integers(min_value=0, max_value=1000),
    min_size=1,
).filter(lambda h: any(c > 0 for c in h.values()))


class TestVocabulary:
    def test_sorted_union_of_positive_counts(self):
        v = align_vocabulary([{"POP_TOP": 2, "LOAD_FAST": 0}, {"BUILD_LIST": 1}])
        assert v.names == ("BUILD_LIST", "POP_TOP")

    def test_rejects_unsorted_or_duplicated(self):
        with pytest.raises(PmfError):
            Vocabulary(("B", "A"))
        with pytest.raises(PmfError):
            Vocabulary(("A", "A"))

    def test_rejects_empty(self):
        with pytest.raises(PmfError):
            align_vocabulary([{"POP_TOP": 0}])
        with pytest.raises(PmfError):
            align_vocabulary([])


class TestStructuralPmf:
    def test_simple_ratio(self):
        v = align_vocabulary([{"POP_TOP": 3, "BUILD_LIST": 1}])
        p = to_structural_pmf({"POP_TOP": 3, "BUILD_LIST": 1}, v)
        assert p.probs.tolist() == [0.25, 0.75]

    def test_missing_vocabulary_entry_is_zero(self):
        v = Vocabulary(("BUILD_LIST", "POP_TOP"))
        p = to_structural_pmf({"POP_TOP": 4}, v)
        assert p.probs.tolist() == [0.0, 1.0]

    def test_rejects_empty_histogram(self):
        v = Vocabulary(("POP_TOP",))
        with pytest.raises(PmfError):
            to_structural_pmf({"POP_TOP": 0}, v)

    def test_rejects_negative_count(self):
        v = Vocabulary(("POP_TOP",))
        with pytest.raises(PmfError):
            to_structural_pmf({"POP_TOP": -1}, v)

    def test_rejects_count_outside_vocabulary(self):
        v = Vocabulary(("POP_TOP",))
        with pytest.raises(PmfError):
            to_structural_pmf({"POP_TOP": 1, "NOP": 2}, v)

    @given(histograms)
    @settings(max_examples=200)
    def test_sums_to_one_and_matches_reference(self, h):
        v = align_vocabulary([h])
        p = to_structural_pmf(h, v)
        assert abs(float(p.probs.sum()) - 1.0) <= 1e-12
        expected = naive_structural_pmf(h, list(v.names))
        assert np.allclose(p.probs, expected, rtol=0.0, atol=1e-15)


class TestWeightedPmf:
    def test_pop_top_build_list_example(self):
        w = WeightTable({"POP_TOP": 1, "BUILD_LIST": 10})
        h = {"POP_TOP": 3, "BUILD_LIST": 1}
        v = align_vocabulary([h])
        q = to_weighted_pmf(h, w, v)
        assert q.probs.tolist() == [0.7692307692307693, 0.23076923076923078]

    def test_weight_count_cancellation(self):
        w = WeightTable({"BINARY_MATRIX_MULTIPLY": 100, "POP_TOP": 1})
        h = {"BINARY_MATRIX_MULTIPLY": 1, "POP_TOP": 100}
        q = to_weighted_pmf(h, w, align_vocabulary([h]))
        assert q.probs.tolist() == [0.5, 0.5]

    @given(histograms, st.sampled_from([1, 10, 100]))
    @settings(max_examples=100)
    def test_uniform_weights_reduce_to_structural(self, h, weight):
        v = align_vocabulary([h])
        w = WeightTable({op: weight for op in v.names}, default_weight=1)
        q = to_weighted_pmf(h, w, v)
        p = to_structural_pmf(h, v)
        assert q.probs.tolist() == p.probs.tolist()

    @given(histograms)
    @settings(max_examples=100)
    def test_matches_reference(self, h):
        weights = {"BUILD_LIST": 10, "FOR_ITER": 10}
        w = WeightTable(weights)
        v = align_vocabulary([h])
        q = to_weighted_pmf(h, w, v)
        expected = naive_weighted_pmf(h, weights, 1, list(v.names))
        assert np.allclose(q.probs, expected, rtol=0.0, atol=1e-15)

    def test_rejects_zero_weighted_total(self):
        v = Vocabulary(("POP_TOP",))
        with pytest.raises(PmfError):
            to_weighted_pmf({}, WeightTable({}), v)


class TestWeightTable:
    def test_rejects_off_tier_weight(self):
        with pytest.raises(PmfError):
            WeightTable({"POP_TOP": 5})
        with pytest.raises(PmfError):
            WeightTable({}, default_weight=2)

    def test_unlisted_opcode_gets_default(self):
        assert WeightTable({"BUILD_LIST": 10}).weight("POP_TOP") == 1

    def test_from_file(self, tmp_path):
        path = tmp_path / "weights.json"
        path.write_text(json.dumps({"default": 1, "weights": {"FOR_ITER": 10}}))
        w = WeightTable.from_file(path)
        assert w.weight("FOR_ITER") == 10
        assert w.weight("POP_TOP") == 1

    def test_shipped_default_anchors(self):
        w = WeightTable.shipped_default()
        assert w.weight("POP_TOP") == 1
        assert w.weight("BUILD_LIST") == 10
        assert w.weight("BINARY_MATRIX_MULTIPLY") == 100
        assert w.default_weight == 1


class TestPmfVector:
    def test_rejects_bad_sum(self):
        v = Vocabulary(("A", "B"))
        with pytest.raises(PmfError):
            PmfVector(v, np.array([0.6, 0.6]))

    def test_rejects_negative_entry(self):
        v = Vocabulary(("A", "B"))
        with pytest.raises(PmfError):
            PmfVector(v, np.array([-0.1, 1.1]))


class TestStaticTensors:
    def test_shared_vocabulary_and_row_order(self):
        hists = [{"POP_TOP": 1}, {"BUILD_LIST": 1, "POP_TOP": 1}]
        p, q = build_static_tensors(hists, WeightTable({"BUILD_LIST": 10}))
        assert p.vocabulary.names == ("BUILD_LIST", "POP_TOP")
        assert p.matrix[0].tolist() == [0.0, 1.0]
        assert p.matrix[1].tolist() == [0.5, 0.5]
        assert q.matrix[1].tolist() == [10.0 / 11.0, 1.0 / 11.0]

    def test_requires_two_solutions(self):
        with pytest.raises(PmfError):
            build_static_tensors([{"POP_TOP": 1}], WeightTable({}))


class TestDynamicTensors:
    def test_availability_tracks_missing_traces(self):
        hists = {
            ("t1", "s1"): {"POP_TOP": 1},
            ("t1", "s2"): {"BUILD_LIST": 1},
            ("t2", "s1"): {"POP_TOP": 2},
        }
        d, c = build_dynamic_tensors(hists, WeightTable({"BUILD_LIST": 10}))
        assert d.test_ids == ("t1", "t2")
        assert d.solution_ids == ("s1", "s2")
        assert d.availability.tolist() == [[True, True], [True, False]]
        assert d.slices[0].m == 2
        assert d.slices[1].m == 1
        assert c.availability.tolist() == d.availability.tolist()

    def test_explicit_orders_are_respected(self):
        hists = {("t1", "s1"): {"POP_TOP": 1}, ("t1", "s2"): {"POP_TOP": 2}}
        d, _ = build_dynamic_tensors(
            hists, WeightTable({}), test_ids=["t1"], solution_ids=["s2", "s1"]
        )
        assert d.solution_ids == ("s2", "s1")

    def test_rejects_empty_input(self):
        with pytest.raises(PmfError):
            build_dynamic_tensors({}, WeightTable({}))


class TestAlignedPmfSet:
    def test_from_rows_demands_common_vocabulary(self):
        va = Vocabulary(("A",))
        vb = Vocabulary(("B",))
        rows = [PmfVector(va, np.array([1.0])), PmfVector(vb, np.array([1.0]))]
        with pytest.raises(PmfError):
            AlignedPmfSet.from_rows(rows)
