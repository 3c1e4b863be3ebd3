"""Group/algebra kernel tests for SE(2) and SO(3)."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geovar import groups
from geovar.errors import AlgebraShapeError, GroupInvariantError, TagMismatchError
from geovar.groups import (
    Ad_matrix,
    Ad_star,
    AlgebraCovector,
    AlgebraVector,
    GroupElement,
    ad_matrix,
    ad_star,
    compose,
    ell_star,
    hat,
    inverse,
    inverse_matrix,
    r_star,
    vee,
)
from geovar.retraction import CayleyRetraction

TAGS = (groups.SE2, groups.SO3)

coord3 = st.lists(
    st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=3, max_size=3
)


def rot_x(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def se2_element(theta, x, y):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, x], [s, c, y], [0, 0, 1.0]])


def random_element(rng, tag):
    retr = CayleyRetraction(tag)
    return retr.tau(rng.uniform(-1.0, 1.0, size=3))


# -- hat / vee ---------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(v=coord3, tag=st.sampled_from(TAGS))
def test_vee_hat_round_trip_is_exact(v, tag):
    v = np.asarray(v)
    assert np.array_equal(vee(hat(v, tag), tag), v)


@settings(max_examples=50, deadline=None)
@given(u=coord3, v=coord3, a=st.floats(-5, 5), b=st.floats(-5, 5),
       tag=st.sampled_from(TAGS))
def test_hat_is_linear(u, v, a, b, tag):
    u, v = np.asarray(u), np.asarray(v)
    lhs = hat(a * u + b * v, tag)
    rhs = a * hat(u, tag) + b * hat(v, tag)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_se2_hat_layout():
    v = np.array([1.0, 2.0, 3.0])  # (rotation, tx, ty)
    expected = np.array([[0, -1, 2], [1, 0, 3], [0, 0, 0]], dtype=float)
    assert np.array_equal(hat(v, groups.SE2), expected)


def test_so3_hat_basis_element():
    expected = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
    assert np.array_equal(hat(np.array([1.0, 0, 0]), groups.SO3), expected)


def test_vee_rejects_matrix_outside_algebra():
    with pytest.raises(AlgebraShapeError):
        vee(np.eye(3), groups.SO3)
    bad = np.zeros((3, 3))
    bad[2, 0] = 1.0  # nonzero bottom row
    with pytest.raises(AlgebraShapeError):
        vee(bad, groups.SE2)


# -- compose / inverse -------------------------------------------------------


def test_compose_identity_and_inverse_cases():
    for tag in TAGS:
        g = GroupElement(random_element(np.random.default_rng(0), tag), tag)
        e = GroupElement(np.eye(3), tag)
        assert np.allclose(compose(e, g).matrix, g.matrix)
        assert np.allclose(compose(g, inverse(g)).matrix, np.eye(3), atol=1e-12)


def test_se2_rotation_composition():
    a = GroupElement(se2_element(np.pi / 2, 0, 0), groups.SE2)
    # independent 3x3 multiply
    expected = se2_element(np.pi / 2, 0, 0) @ se2_element(np.pi / 2, 0, 0)
    assert np.allclose(compose(a, a).matrix, expected, atol=1e-12)
    assert np.allclose(compose(a, a).matrix, se2_element(np.pi, 0, 0), atol=1e-12)


def test_so3_inverse_is_transpose():
    g = GroupElement(rot_x(0.7), groups.SO3)
    assert np.allclose(inverse(g).matrix, rot_x(-0.7), atol=1e-14)


def test_se2_closed_form_inverse():
    g = GroupElement(se2_element(0.0, 1.0, 2.0), groups.SE2)
    assert np.allclose(inverse(g).matrix, se2_element(0.0, -1.0, -2.0), atol=1e-14)


def test_compose_rejects_mismatched_tags():
    a = GroupElement(np.eye(3), groups.SE2)
    b = GroupElement(np.eye(3), groups.SO3)
    with pytest.raises(TagMismatchError):
        compose(a, b)


def test_group_element_validation():
    with pytest.raises(GroupInvariantError):
        GroupElement(2.0 * np.eye(3), groups.SO3)
    bad = np.eye(3)
    bad[2, 0] = 0.5
    with pytest.raises(GroupInvariantError):
        GroupElement(bad, groups.SE2)


# -- bracket structure -------------------------------------------------------


def bracket(u, v, tag):
    return vee(hat(u, tag) @ hat(v, tag) - hat(v, tag) @ hat(u, tag), tag)


def test_se2_structure_constants():
    e = np.eye(3)
    assert np.allclose(bracket(e[0], e[1], groups.SE2), e[2])
    assert np.allclose(bracket(e[0], e[2], groups.SE2), -e[1])
    assert np.allclose(bracket(e[1], e[2], groups.SE2), np.zeros(3))


def test_so3_bracket_is_cross_product():
    rng = np.random.default_rng(1)
    for _ in range(20):
        u, v = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(bracket(u, v, groups.SO3), np.cross(u, v), atol=1e-12)


def test_jacobi_identity_both_algebras():
    rng = np.random.default_rng(2)
    for tag in TAGS:
        for _ in range(20):
            u, v, w = rng.normal(size=(3, 3))
            total = (
                bracket(u, bracket(v, w, tag), tag)
                + bracket(v, bracket(w, u, tag), tag)
                + bracket(w, bracket(u, v, tag), tag)
            )
            assert np.abs(total).max() < 1e-12


def test_ad_matrix_matches_bracket():
    rng = np.random.default_rng(3)
    for tag in TAGS:
        for _ in range(20):
            u, v = rng.normal(size=(2, 3))
            assert np.allclose(ad_matrix(u, tag) @ v, bracket(u, v, tag), atol=1e-12)


# -- coadjoint actions -------------------------------------------------------


def test_ad_star_of_zero_is_zero():
    for tag in TAGS:
        mu = AlgebraCovector(np.array([1.0, -2.0, 3.0]), tag)
        out = ad_star(AlgebraVector(np.zeros(3), tag), mu)
        assert np.array_equal(out.coords, np.zeros(3))


def test_ad_star_pairing_identity_randomized():
    rng = np.random.default_rng(4)
    for tag in TAGS:
        for _ in range(100):
            xi, mu, eta = rng.normal(size=(3, 3))
            lhs = ad_star(AlgebraVector(xi, tag), AlgebraCovector(mu, tag)).pair(
                AlgebraVector(eta, tag)
            )
            rhs = float(mu @ bracket(xi, eta, tag))
            assert abs(lhs - rhs) < 1e-12


def test_so3_ad_star_cross_product_case():
    xi = AlgebraVector(np.array([1.0, 0, 0]), groups.SO3)
    mu = AlgebraCovector(np.array([0.0, 1.0, 0]), groups.SO3)
    eta = AlgebraVector(np.array([0.0, 0, 1.0]), groups.SO3)
    # <mu, xi x eta> = <(0,1,0), (0,-1,0)> = -1
    assert abs(ad_star(xi, mu).pair(eta) - (-1.0)) < 1e-14


def test_Ad_star_identity_and_group_property():
    rng = np.random.default_rng(5)
    for tag in TAGS:
        mu = AlgebraCovector(rng.normal(size=3), tag)
        e = GroupElement(np.eye(3), tag)
        assert np.allclose(Ad_star(e, mu).coords, mu.coords)
        g = GroupElement(random_element(rng, tag), tag)
        round_trip = Ad_star(g, Ad_star(inverse(g), mu))
        assert np.allclose(round_trip.coords, mu.coords, atol=1e-12)


def test_Ad_star_pairing_identity_randomized():
    rng = np.random.default_rng(6)
    for tag in TAGS:
        for _ in range(100):
            g = random_element(rng, tag)
            mu, eta = rng.normal(size=(2, 3))
            lhs = Ad_star(GroupElement(g, tag), AlgebraCovector(mu, tag)).pair(
                AlgebraVector(eta, tag)
            )
            Ad_eta = vee(g @ hat(eta, tag) @ inverse_matrix(g, tag), tag, tol=1e-8)
            assert abs(lhs - float(mu @ Ad_eta)) < 1e-12


def test_so3_Ad_star_conjugation_oracle():
    g = rot_z(np.pi / 2)
    mu = np.array([1.0, 0.0, 0.0])
    # build the Ad matrix by conjugating basis elements
    Ad = np.stack(
        [vee(g @ hat(e, groups.SO3) @ g.T, groups.SO3, tol=1e-8) for e in np.eye(3)],
        axis=1,
    )
    out = Ad_star(GroupElement(g, groups.SO3), AlgebraCovector(mu, groups.SO3))
    assert np.allclose(out.coords, Ad.T @ mu, atol=1e-12)
    assert np.allclose(Ad, Ad_matrix(g, groups.SO3), atol=1e-12)


# -- translation pullbacks ---------------------------------------------------


def test_translation_pullbacks_identity_cases():
    rng = np.random.default_rng(7)
    for tag in TAGS:
        alpha = AlgebraCovector(rng.normal(size=3), tag)
        e = GroupElement(np.eye(3), tag)
        assert np.allclose(ell_star(e, alpha).coords, alpha.coords)
        assert np.allclose(r_star(e, alpha).coords, alpha.coords)
        g = GroupElement(random_element(rng, tag), tag)
        assert np.allclose(
            ell_star(g, ell_star(inverse(g), alpha)).coords, alpha.coords
        )
        assert np.allclose(
            r_star(g, r_star(inverse(g), alpha)).coords, alpha.coords, atol=1e-12
        )


def test_left_pullback_matches_finite_difference_on_trace():
    """<ell*_g dF, eta> for F(g) = trace(g) against a central difference of
    F(g tau(eps eta)); the covector is carried in trivialized coordinates."""
    eps = 1e-5
    for tag in TAGS:
        rng = np.random.default_rng(8)
        retr = CayleyRetraction(tag)
        g = random_element(rng, tag)
        # trivialized differential of F at g
        alpha = np.empty(3)
        for j, ej in enumerate(np.eye(3)):
            alpha[j] = (
                np.trace(g @ retr.tau(eps * ej)) - np.trace(g @ retr.tau(-eps * ej))
            ) / (2 * eps)
        for eta in np.eye(3):
            pulled = ell_star(
                GroupElement(g, tag), AlgebraCovector(alpha, tag)
            ).pair(AlgebraVector(eta, tag))
            fd = (
                np.trace(g @ retr.tau(eps * eta)) - np.trace(g @ retr.tau(-eps * eta))
            ) / (2 * eps)
            assert abs(pulled - fd) < 1e-6


# -- renormalization ---------------------------------------------------------


def test_polar_projection_restores_orthogonality():
    rng = np.random.default_rng(9)
    g = random_element(rng, groups.SO3)
    drifted = g + 1e-6 * rng.normal(size=(3, 3))
    fixed = groups.renormalize(drifted, groups.SO3)
    assert groups.orthogonality_defect(fixed, groups.SO3) < 1e-12
    assert np.abs(fixed - g).max() < 1e-5
