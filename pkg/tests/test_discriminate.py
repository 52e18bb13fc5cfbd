import itertools

import pytest

from blockloci.discriminate import (CLASSES, DISCLAIMER, FAMILIES, RULES, TABLE_CELLS,
                                    StructureDescriptor, candidates, descriptor_from_graph,
                                    is_consistent, predict_classes)
from blockloci.errors import GraphError
from blockloci.systems import custom, lfr, parallel_wh, wiener
from conftest import F1, F2, G1, G2, G3, ref_loop_graph

SD = StructureDescriptor


def test_table_predictions():
    assert predict_classes(SD("single_branch", n_PFF=2, n_ZFF=1)) == ("all_fixed", "all_fixed")
    assert predict_classes(SD("ff_fb_parallel", n_FF=2, n_FB=1, n_PFF=2, n_ZFF=2,
                              n_PFB=1, n_ZFB=2)) == ("all_move", "mixed")
    assert predict_classes(SD("ff_fb_parallel", n_FF=1, n_FB=1, n_PFF=1, n_PFB=1)) == \
        ("all_move", "all_fixed")
    assert predict_classes(SD("ff_fb_parallel", n_FF=2, n_FB=1, n_PFF=2, n_ZFB=2)) == \
        ("all_move", "all_move")
    assert predict_classes(SD("parallel_ff", n_FF=2, n_PFF=2)) == ("all_fixed", "all_move")
    assert predict_classes(SD("lfr_g4_zero", n_PFF=2, n_PFB=1)) == ("mixed", "all_fixed")
    assert predict_classes(SD("lfr_g4_nonzero", n_PFF=2, n_PFB=1, n_PD=1)) == ("mixed", "all_move")
    assert predict_classes(SD("symmetric_fffb", n_PFF=1, n_PFB=1)) == ("mixed", "mixed")


def test_cascade_adds_fixed_roots():
    base = SD("parallel_ff", n_FF=2, n_PFF=2)
    # fixed poles added to fixed poles change nothing
    assert predict_classes(SD("cascade_augmented", n_PC=1, base=base)) == ("all_fixed", "all_move")
    assert predict_classes(SD("cascade_augmented", n_ZC=1, base=base)) == ("all_fixed", "mixed")
    loop = SD("ff_fb_parallel", n_FF=1, n_FB=1, n_PFF=1, n_PFB=1)
    assert predict_classes(SD("cascade_augmented", n_PC=1, base=loop)) == ("mixed", "all_fixed")


def test_invalid_descriptors():
    bad = [SD("unknown"), SD("single_branch", n_NL=0), SD("single_branch", n_FF=2),
           SD("parallel_ff", n_FF=1, n_PFF=1), SD("parallel_ff", n_FF=2),
           SD("lfr_g4_zero", n_PFF=1), SD("lfr_g4_zero", n_PFB=1, n_PD=1),
           SD("symmetric_fffb", n_PFB=1), SD("cascade_augmented", n_PC=1),
           SD("cascade_augmented", base=SD("parallel_ff", n_FF=2, n_PFF=1)),
           SD("single_branch", n_PFF=-1)]
    for d in bad:
        with pytest.raises(ValueError):
            predict_classes(d)


def test_ref_loop_verdict():
    v = candidates(("all_move", "mixed"))
    assert v.table_cell == "multi branch FF, poles in FB"
    assert "ff_fb_parallel" in v.compatible_families()
    excl = {c["family"]: c["rule"] for c in v.excluded}
    assert excl["single_branch"] == "single-branch"
    assert excl["parallel_ff"] == "parallel-ff"
    assert v.disclaimer == DISCLAIMER


def test_nothing_moves_only_single_branch():
    v = candidates(("all_fixed", "all_fixed"))
    assert v.compatible_families() == ["single_branch"]
    for fam in ("ff_fb_parallel", "lfr_g4_zero", "lfr_g4_nonzero", "symmetric_fffb"):
        assert fam in v.excluded_families()


def test_starred_cells():
    assert "symmetric_fffb" in candidates(("mixed", "mixed")).compatible_families()
    assert "lfr_g4_zero" in candidates(("mixed", "all_fixed")).compatible_families()
    assert "lfr_g4_nonzero" in candidates(("mixed", "all_move")).compatible_families()
    assert candidates(("all_fixed", "mixed")).compatible_families() == ["cascade_augmented"]


def test_every_cell_has_a_verdict():
    for obs in itertools.product(CLASSES, CLASSES):
        v = candidates(obs)
        assert set(v.compatible_families()) | set(v.excluded_families()) == set(FAMILIES)
        assert all(c["rule"] in RULES for c in v.excluded)
        assert v.table_cell == TABLE_CELLS[obs]
    with pytest.raises(ValueError):
        candidates(("all_fixed", "sometimes"))


def test_is_consistent_explains():
    ok, why = is_consistent(SD("single_branch", n_PFF=1), ("all_fixed", "all_move"))
    assert not ok
    assert why.startswith("single-branch")
    assert "zeros must all stay fixed" in why
    ok, _ = is_consistent(SD("ff_fb_parallel", n_FF=1, n_FB=1, n_PFF=1, n_PFB=1),
                          ("all_move", "all_fixed"))
    assert ok
    ok, _ = is_consistent(SD("lfr_g4_nonzero", n_PFF=1, n_PFB=1, n_PD=1), ("mixed", "all_move"))
    assert ok


def test_descriptor_from_graph():
    d = descriptor_from_graph(ref_loop_graph())
    assert (d.family, d.n_FF, d.n_FB, d.n_PFF, d.n_PFB, d.n_NL) == ("ff_fb_parallel", 2, 1, 2, 1, 3)
    # zeros count the delay: G3 contributes degree 2
    assert d.n_ZFB == 2
    assert predict_classes(d) == ("all_move", "mixed")
    assert descriptor_from_graph(lfr(G1, G2, G3, F1)).family == "lfr_g4_zero"
    assert predict_classes(descriptor_from_graph(parallel_wh([[G1, F1], [G2, F2]]))) == \
        ("all_fixed", "all_move")
    assert descriptor_from_graph(wiener(G1, F1)).n_NL == 1
    g = ref_loop_graph()
    with pytest.raises(GraphError):
        descriptor_from_graph(custom(g.nodes, g.edges))
