import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htype.algebra import GroupPoint, bracket, dilate, from_name, make_heisenberg_aniso
from htype.calculus import (
    FD_TOL,
    Jet2,
    a_field,
    b_field,
    coordinate_field,
    defect_sample,
    eikonal_defect,
    fd_field,
    harmonic_defect,
    horizontal_frame,
    horizontal_gradient,
    horizontal_hessian,
    infinity_laplacian,
    kaplan_field,
    kaplan_norm,
    norm_sq_horizontal_gradient,
    scaled_harmonic_defect,
    sub_laplacian,
    sup_defect,
    _vertical_sum,
)
from htype.deviation import deviation, deviation_at_metric
from htype.metric import VerticalMetric, j_matrix, op_norm, orthonormal_vertical_basis
from identity_checks import identity_residuals

GROUPS = ["heis(1,1)", "heis(1,3)", "free(3)", "geps(2,1)"]


def spd(seed, k):
    A = np.random.default_rng(seed).standard_normal((k, k))
    return VerticalMetric(A @ A.T + 0.5 * np.eye(k))


def test_jet_arithmetic():
    g = np.array([1.0, 2.0])
    a = Jet2(2.0, g, np.eye(2))
    p = a * a
    assert p.value == 4.0
    np.testing.assert_allclose(p.grad, 4 * g)
    np.testing.assert_allclose(p.hess, 4 * np.eye(2) + 2 * np.outer(g, g))
    s = a + 1.0
    assert s.value == 3.0
    with pytest.raises(ValueError):
        Jet2(0.0, g, np.array([[0, 1.0], [0, 0]]))
    with pytest.raises(ValueError):
        Jet2(0.0, g, np.eye(3))


def test_power_and_log_reject_nonpositive():
    f = coordinate_field(from_name("heis(1)"), 0)
    with pytest.raises(ValueError):
        f.power(0.5)([-1.0, 0, 0])
    with pytest.raises(ValueError):
        f.log()([0.0, 1, 1])
    with pytest.raises(ValueError):
        coordinate_field(from_name("heis(1)"), 3)


def test_frame_at_origin_is_coordinate_frame():
    alg = from_name("free(4)")
    F = horizontal_frame(alg, np.zeros(alg.dim))
    np.testing.assert_array_equal(F, np.hstack([np.eye(4), np.zeros((4, 6))]))


def test_heisenberg_frame():
    F = horizontal_frame(from_name("heis(1)"), [0.3, -0.7, 2.0])
    np.testing.assert_allclose(F, [[1, 0, 0.35], [0, 1, 0.15]])


@pytest.mark.parametrize("name", ["free(3)", "geps(2,0.5)", "heis(1,2)"])
def test_frame_commutators_reproduce_bracket(name):
    # [X_i, X_j] t = X_i(X_j t) - X_j(X_i t), read off the horizontal Hessian
    alg = from_name(name)
    z = np.random.default_rng(0).standard_normal(alg.dim)
    e = np.eye(alg.m)
    for q in range(alg.m2):
        H = horizontal_hessian(coordinate_field(alg, alg.m + q).as_finite_difference(), alg, z)
        for i in range(alg.m):
            for j in range(alg.m):
                assert H[i, j] - H[j, i] == pytest.approx(bracket(alg, e[i], e[j])[q], abs=1e-9)


@pytest.mark.parametrize("name", GROUPS)
def test_frame_identities_against_finite_differences(name):
    alg = from_name(name)
    metric = VerticalMetric.identity(alg.m2) if alg.m2 == 1 else spd(3, alg.m2)
    rng = np.random.default_rng(1)
    exact_keys = ("grad_b", "hess_b", "grad_t", "hess_t", "grad_c", "hess_c", "lap_c", "grad_a")
    for _ in range(20):
        res, fd_err = identity_residuals(alg, metric, rng.standard_normal(alg.dim))
        assert max(res[k] for k in exact_keys) <= 1e-7, res
        assert max(res.values()) <= 1e-6, res
        assert fd_err <= FD_TOL


@pytest.mark.parametrize("name", ["free(3)", "heis(1,3)"])
def test_sub_laplacian_of_a_closed_form(name):
    alg = from_name(name)
    metric = VerticalMetric.identity(alg.m2)
    a = a_field(alg, metric)
    rng = np.random.default_rng(2)
    E = orthonormal_vertical_basis(metric)
    for _ in range(20):
        z = rng.standard_normal(alg.dim)
        x = z[:alg.m]
        s = sum(x @ (np.linalg.matrix_power(j_matrix(alg, metric, E[:, q]), 2) + np.eye(alg.m)) @ x
                for q in range(alg.m2))
        want = 4 * (alg.Q + 2) * (x @ x) - 8 * s
        assert sub_laplacian(a, alg, z) == pytest.approx(want, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("name", GROUPS + ["free(5)"])
def test_sub_laplacian_of_b_is_2m(name):
    alg = from_name(name)
    b = b_field(alg)
    for z in np.random.default_rng(3).standard_normal((10, alg.dim)):
        assert sub_laplacian(b, alg, z) == pytest.approx(2 * alg.m, abs=1e-10)


def test_infinity_laplacian_of_b():
    # grad_0 b = 2x and the symmetric part of the Hessian is 2 Id: (2x)^T (2 Id) (2x)
    alg = from_name("free(3)")
    for z in np.random.default_rng(4).standard_normal((5, alg.dim)):
        x = z[:3]
        assert infinity_laplacian(b_field(alg), alg, z) == pytest.approx(8 * (x @ x))


def test_infinity_laplacian_of_heisenberg_norm_vanishes():
    alg = from_name("heis(1)")
    N = kaplan_field(alg)
    for z in np.random.default_rng(5).standard_normal((20, 3)):
        assert abs(infinity_laplacian(N, alg, z)) <= 1e-10 * max(1, kaplan_norm(alg, VerticalMetric.identity(1), z))


def test_log_rule_for_infinity_laplacian():
    alg = from_name("heis(1,1)")
    N = kaplan_field(alg)
    for z in np.random.default_rng(6).standard_normal((10, alg.dim)):
        v = N.value(z)
        g2 = norm_sq_horizontal_gradient(N, alg, z)
        want = infinity_laplacian(N, alg, z) / v ** 3 - g2 ** 2 / v ** 4
        assert infinity_laplacian(N.log(), alg, z) == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_kaplan_norm_examples():
    alg = from_name("heis(1)")
    N = kaplan_field(alg)
    assert N.value([3.0, 4.0, 0.0]) == pytest.approx(5.0)
    assert N.value([0.0, 0.0, 1.0]) == pytest.approx(2.0)
    assert norm_sq_horizontal_gradient(N, alg, [1.0, 0.0, 0.0]) == pytest.approx(1.0)


@pytest.mark.parametrize("name", GROUPS)
def test_kaplan_gradient_matches_finite_differences(name):
    alg = from_name(name)
    N = kaplan_field(alg)
    Nfd = N.as_finite_difference()
    for z in np.random.default_rng(7).standard_normal((100, alg.dim)):
        np.testing.assert_allclose(horizontal_gradient(N, alg, z),
                                   horizontal_gradient(Nfd, alg, z), atol=1e-7)


def test_fd_richardson_estimate_is_honest():
    f = fd_field(lambda Z: np.sin(Z[:, 0]) * np.exp(Z[:, 1]))
    z = np.array([0.3, -0.2])
    j = f(z)
    exact_g = [math.cos(0.3) * math.exp(-0.2), math.sin(0.3) * math.exp(-0.2)]
    np.testing.assert_allclose(j.grad, exact_g, atol=1e-9)
    assert j.error <= FD_TOL
    assert f.mode == "finite_difference"


def test_eikonal_examples():
    alg = make_heisenberg_aniso([1, 2])
    met = VerticalMetric.identity(1)
    assert eikonal_defect(alg, met, [1, 0, 0, 0, 1]) == pytest.approx(0.0, abs=1e-14)
    assert eikonal_defect(alg, met, [0, 0, 1, 0, 1]) == pytest.approx(16 * -3 / 17 ** 1.5)


@pytest.mark.parametrize("name", ["free(3)", "heis(1,2)", "geps(2,1)"])
def test_defects_match_jet_evaluation(name):
    alg = from_name(name)
    metric = VerticalMetric.identity(alg.m2) if alg.m2 == 1 else spd(0, alg.m2)
    N = kaplan_field(alg, metric)
    for z in np.random.default_rng(8).standard_normal((100, alg.dim)):
        n = N.value(z)
        g2 = norm_sq_horizontal_gradient(N, alg, z)
        x = z[:alg.m]
        assert eikonal_defect(alg, metric, z) == pytest.approx((x @ x) / n ** 2 - g2, abs=1e-9)
        h = n * sub_laplacian(N, alg, z) - (alg.Q - 1) * g2
        assert harmonic_defect(alg, metric, z) == pytest.approx(h, abs=1e-7)
        u = N.power(2 - alg.Q)
        assert scaled_harmonic_defect(alg, metric, z) == pytest.approx(
            n ** alg.Q * sub_laplacian(u, alg, z), abs=1e-7)


@settings(max_examples=30)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6),
       st.floats(0.05, 20.0))
def test_defects_are_zero_homogeneous(z, lam):
    alg = from_name("free(3)")
    metric = spd(1, 3)
    z = np.array(z)
    if kaplan_norm(alg, metric, z) < 0.1:
        return
    p = GroupPoint.from_vector(z, 3)
    q = dilate(p, lam)
    a, b = defect_sample(alg, metric, p), defect_sample(alg, metric, q)
    assert a.eikonal == pytest.approx(b.eikonal, abs=1e-9)
    assert a.harmonic == pytest.approx(b.harmonic, abs=1e-9)
    assert a.scaled_harmonic == pytest.approx(b.scaled_harmonic, abs=1e-9)


def test_defects_reject_origin():
    alg = from_name("heis(1)")
    with pytest.raises(ValueError):
        eikonal_defect(alg, VerticalMetric.identity(1), [0, 0, 0])


def test_vertical_sum_is_basis_independent():
    alg = from_name("free(3)")
    metric = spd(5, 3)
    P = _vertical_sum(alg, metric)
    # a second G-orthonormal basis from the eigendecomposition of G
    w, V = np.linalg.eigh(metric.G)
    E = V / np.sqrt(w)
    P2 = alg.m2 * np.eye(alg.m)
    for q in range(alg.m2):
        J = j_matrix(alg, metric, E[:, q])
        P2 += J @ J
    np.testing.assert_allclose(P, P2, atol=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heisenberg_defects_vanish(n):
    alg = from_name(f"heis({','.join(['1'] * n)})")
    for kind in ("eikonal", "harmonic", "scaled_harmonic"):
        assert sup_defect(alg, kind=kind).sup <= 1e-8
    u = kaplan_field(alg).power(2 - alg.Q)
    N = kaplan_field(alg)
    for z in np.random.default_rng(n).standard_normal((50, alg.dim)):
        assert abs(sub_laplacian(u, alg, z)) * N.value(z) ** alg.Q <= 1e-7


@pytest.mark.parametrize("name", ["free(3)", "heis(1,2)", "geps(2,1)", "heis(0.5,1,1)"])
def test_eikonal_sup_bounds(name):
    alg = from_name(name)
    metric = VerticalMetric.identity(alg.m2) if alg.m2 == 1 else spd(2, alg.m2)
    d = deviation_at_metric(alg, metric).value
    res = sup_defect(alg, metric, "eikonal")
    assert d * 2 / (3 * math.sqrt(3)) - 1e-6 <= res.sup <= math.sqrt(alg.m) * d + 1e-6
    assert res.interior
    # the sup is attained at |x| = 2^(3/4) and equals 2/(3 sqrt 3) max_t ||J_t^2 + Id||_op
    w = res.witness
    assert abs(eikonal_defect(alg, metric, w.as_vector())) == pytest.approx(res.sup, rel=1e-9)


def test_eikonal_sup_closed_form_heisenberg():
    alg = make_heisenberg_aniso([1, 2])
    res = sup_defect(alg, VerticalMetric.identity(1), "eikonal")
    M = np.linalg.matrix_power(j_matrix(alg, VerticalMetric.identity(1), [1.0]), 2) + np.eye(4)
    assert res.sup == pytest.approx(2 / (3 * math.sqrt(3)) * op_norm(M), rel=1e-9)
    assert np.linalg.norm(res.witness.x) == pytest.approx(2 ** 0.75, rel=1e-6)


@pytest.mark.parametrize("name", ["free(3)", "heis(1,2)"])
def test_harmonic_sup_two_sided(name):
    alg = from_name(name)
    metric = deviation(alg).metric
    d = deviation_at_metric(alg, metric).value
    s = sup_defect(alg, metric, "harmonic").sup
    m, m2, Q = alg.m, alg.m2, alg.Q
    C = 3 * math.sqrt(3 * (Q + 2)) / (2 * (m + 2) ** 1.5)
    assert d <= C * s + 1e-4
    assert s <= math.sqrt(m) * (2 * (Q + 2) / (3 * math.sqrt(3)) + 2 * m2) * d + 1e-4
    sh = sup_defect(alg, metric, "scaled_harmonic").sup
    assert sh == pytest.approx((Q - 2) * s, rel=1e-9)


def test_sup_defect_json_and_unpacking():
    res = sup_defect(from_name("free(3)"))
    sup, witness = res
    assert sup == res.sup and isinstance(witness, GroupPoint)
    assert set(res.to_json()) == {"kind", "sup", "witness", "samples", "interior", "seed"}
    with pytest.raises(ValueError):
        sup_defect(from_name("free(3)"), kind="bogus")


def test_sup_over_optimal_metric_bounded_by_deviation():
    for name in ("heis(1,2)", "heis(0.5,1)", "gbar(2,0.5)", "heis(0.5,1,1,1)"):
        alg = from_name(name)
        rep = deviation(alg)
        assert sup_defect(alg, rep.metric).sup <= math.sqrt(alg.m) * rep.value + 2e-6
