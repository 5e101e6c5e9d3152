import numpy as np
import pytest

from mmnet import network as nw
from mmnet import regions
from mmnet.errors import AlphabetMismatch, InvalidCut, InvalidDestination, MmnetError, MultipleDestinations
from mmnet.network import Cut


def test_cut_bitmask_roundtrip():
    for mask in range(8):
        assert Cut.from_bitmask(mask, 3).bitmask == mask
    assert Cut([1, 3]).complement(3) == (2,)
    with pytest.raises(InvalidCut):
        Cut.from_bitmask(8, 3)


def test_validate_network_lists_problems():
    spec = nw.NetworkSpec(2, [], [2], (2, 1), (1, 2), np.full((2, 1, 1, 2), 0.6))
    codes = {d.code for d in nw.validate_network(spec)}
    assert codes == {"MissingSources", "NotNormalized"}
    with pytest.raises(MmnetError):
        nw.require_valid(spec)


def test_product_links_channel(fixtures):
    line = fixtures["line"]
    assert line.input_sizes == (2, 2, 1) and line.output_sizes == (1, 2, 2)
    # Y2 depends only on X1 through BSC(0.1)
    m = nw.marginal_channel_matrix(line, Cut([1, 2]))
    assert m.shape == (4, 2)
    assert np.allclose(m[:, 0], [0.9, 0.1, 0.9, 0.1])


def test_erasure_network_layout(fixtures):
    er = fixtures["erasure_relay"]
    assert er.output_sizes == (1, 3, 12)
    ch = er.channel.reshape(4, -1).sum(axis=1)
    assert np.allclose(ch, 1.0)
    # node 3 sees X2 through edge (2,3) erased with prob 0.5 and the 2-bit pattern
    y3 = er.channel.sum(axis=(3, 4)).reshape(2, 2, 3, 4)  # (x1, x2, symbol, pattern)
    assert y3[0, 1, 1, :].sum() == pytest.approx(0.5)
    assert y3[0, 1, 2, :].sum() == pytest.approx(0.5)
    with pytest.raises(AlphabetMismatch):
        nw.build_erasure_network([(1, 2), (1, 2)], 0.5, [1], [2], [2, 1])


def test_erasure_determinism(fixtures):
    er = fixtures["erasure_relay"]
    assert all(nw.check_determinism(er).values())
    assert not nw.check_determinism(fixtures["line"], [Cut([1, 2])])[Cut([1, 2])]


def test_feedback_version(fixtures):
    line = fixtures["line"]
    fb = nw.build_feedback_version(line)
    assert fb.output_sizes == (2, 4, 4)
    assert fb.feedback_of == 3
    with pytest.raises(InvalidDestination):
        nw.build_feedback_version(line, 2)
    two = nw.NetworkSpec(3, [1], [2, 3], line.input_sizes, line.output_sizes, line.channel)
    with pytest.raises(MultipleDestinations):
        nw.build_feedback_version(two)
    rng = np.random.default_rng(0)
    for cut in nw.region_cuts(line):
        if not cut.T or 3 in cut.T:
            continue
        for _ in range(5):
            flat = rng.dirichlet(np.ones(line.n_inputs))
            assert regions.cut_value_fast(fb, cut, flat) == pytest.approx(
                regions.cut_value_fast(line, cut, flat), abs=1e-12)


def test_product_dominance_on_erasure_fixture(fixtures):
    er = fixtures["erasure_relay"]
    rep = nw.check_product_dominance(er, nw.uniform_product_input(er))
    assert rep.dominated
    assert max(rep.slacks.values()) <= 1e-3
