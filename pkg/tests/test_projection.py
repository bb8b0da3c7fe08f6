import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bpfem import build_structured_mesh
from bpfem.fe_space import build_dof_map, l2_norm
from bpfem.projection import AdmissibleBox, active_sets, clip_plus, complement, split

BOX = AdmissibleBox(1.0)
finite = st.floats(-1e6, 1e6, allow_nan=False)
kappas = st.floats(0.0, 1e3, allow_nan=False)


def vectors(n=st.integers(1, 50)):
    return n.flatmap(lambda k: arrays(np.float64, k, elements=finite))


def test_clip_example():
    np.testing.assert_array_equal(clip_plus([-0.5, 0.3, 1.7], BOX), [0.0, 0.3, 1.0])
    np.testing.assert_allclose(complement([-0.5, 0.3, 1.7], [0.0, 0.3, 1.0]), [-0.5, 0.0, 0.7])


def test_clip_mask_passes_through():
    v = np.array([-2.0, 5.0, 0.5])
    out = clip_plus(v, BOX, mask=np.array([True, False, True]))
    np.testing.assert_array_equal(out, [0.0, 5.0, 0.5])


def test_active_sets_examples():
    lo, hi = active_sets([0.2, 0.5, 0.9], BOX)
    assert lo.size == 0 and hi.size == 0
    lo, hi = active_sets([-1.0, 2.0], BOX)
    assert lo.tolist() == [0] and hi.tolist() == [1]
    # ties count as active
    lo, hi = active_sets([0.0, 1.0], BOX)
    assert lo.tolist() == [0] and hi.tolist() == [1]


def test_complement_shape_mismatch():
    with pytest.raises(ValueError):
        complement([1.0, 2.0], [1.0])


@pytest.mark.parametrize("kappa, lower", [(-1.0, 0.0), (np.nan, 0.0), (1.0, 2.0)])
def test_box_validation(kappa, lower):
    with pytest.raises(ValueError):
        AdmissibleBox(kappa, lower)


@settings(max_examples=1000)
@given(v=vectors(), kappa=kappas)
def test_idempotence_and_box(v, kappa):
    box = AdmissibleBox(kappa)
    vp = clip_plus(v, box)
    assert np.all((vp >= 0) & (vp <= kappa))
    np.testing.assert_array_equal(clip_plus(vp, box), vp)
    inside = np.clip(v, 0, kappa)
    np.testing.assert_array_equal(clip_plus(inside, box), inside)


@settings(max_examples=1000)
@given(data=st.data(), kappa=kappas)
def test_nodal_lipschitz(data, kappa):
    n = data.draw(st.integers(1, 30))
    v = data.draw(arrays(np.float64, n, elements=finite))
    w = data.draw(arrays(np.float64, n, elements=finite))
    box = AdmissibleBox(kappa)
    assert np.all(np.abs(clip_plus(v, box) - clip_plus(w, box)) <= np.abs(v - w))


@settings(max_examples=1000)
@given(v=vectors(), kappa=kappas)
def test_shift_identity_and_split(v, kappa):
    box = AdmissibleBox(kappa)
    vp, vm = split(v, box)
    np.testing.assert_array_equal(clip_plus(vp + vm, box), vp)
    np.testing.assert_array_equal(vp + vm, v)
    # sign pattern of the complement
    assert np.all(vp[vm < 0] == 0.0)
    assert np.all(vp[vm > 0] == kappa)
    lo, hi = active_sets(v, box)
    support = np.flatnonzero(vm != 0)
    exact_hits = np.flatnonzero((v == 0.0) | (v == kappa))
    assert set(support) == set(np.union1d(lo, hi)) - set(exact_hits)


@settings(max_examples=1000)
@given(data=st.data(), kappa=kappas)
def test_nodal_monotonicity(data, kappa):
    n = data.draw(st.integers(1, 30))
    v = data.draw(arrays(np.float64, n, elements=finite))
    w = data.draw(arrays(np.float64, n, elements=finite))
    sigma = data.draw(arrays(np.float64, n, elements=st.floats(1e-6, 1e3)))
    box = AdmissibleBox(kappa)
    vp, vm = split(v, box)
    wp, wm = split(w, box)
    prod = (vm - wm) * (vp - wp)
    assert np.all(prod >= 0)
    assert np.sum(sigma * prod) >= 0


@pytest.mark.parametrize("family, el", [("tri-alt", "p1"), ("tri-perturbed", "p2"), ("quad", "q1")])
def test_l2_stability(family, el):
    rng = np.random.default_rng(0)
    kappa = 3.0
    consts = []
    for N in (5, 9, 17, 33):
        dm = build_dof_map(build_structured_mesh(family, N), el)
        worst = 0.0
        for _ in range(20):
            v = rng.normal(scale=10.0, size=dm.n_dofs)
            worst = max(worst, l2_norm(dm, clip_plus(v, AdmissibleBox(kappa))) / kappa)
        consts.append(worst)
    assert max(consts) <= 1.0 + 1e-12
    assert max(consts) / min(consts) < 1.5
