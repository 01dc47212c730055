import numpy as np
import pytest

from lcsmech.contact import (CHART, REPRESENTATIONS, ContactError, ContactPair, LieSystemSpec, RankDeficient,
                             UnknownRepresentation, bracket_table, builtin_structure, check_construction,
                             check_duality, check_g41, find_g41_basis, format_table, lcs_from_pair,
                             lie_system_field, nondegeneracy_profile, reeb_fields, reeb_residuals, representation,
                             top_power_decomposition, verify_contact_pair, verify_lcs_automorphism)
from lcsmech.dynamics import integrate
from lcsmech.expr import UnknownIdentifier, sample_rng
from lcsmech.exterior import DifferentialForm, VectorFieldExpr, form_matrix_at, wedge
from lcsmech.lcs import DegeneracyDetected, lee_field

OMEGA = {
    "g41-rep1": {"x2,x4": "-1", "x1,x3": "1", "x4,x3": "-x2"},
    "g41-rep2": {"x2,x4": "-1", "x1,x3": "1", "x1,x4": "-x4", "x3,x4": "x2"},
    "g41-rep4": {"x1,x3": "1", "x1,x4": "x4", "x2,x4": "1", "x3,x4": "-(x4 + x2)"},
}

SYSTEMS = {
    "g41-rep1": ["a1 + a4*x2", "a2 + a4*x3", "a3", "a4"],
    "g41-rep2": ["a1 + a4*x2", "a2 + a4*x3", "a3 + a4*x4", "a4"],
    "g41-rep4": ["a1 + a3*x3 + a4*x2", "a2 + a3*x4", "a3 + a4*x4", "-a4"],
}

COEFFS = ["t", "t^2", "1 + t", "2*t^3"]


def _display(rid):
    subs = dict(zip(("a1", "a2", "a3", "a4"), (f"({c})" for c in COEFFS)))
    out = []
    for comp in SYSTEMS[rid]:
        for k, v in subs.items():
            comp = comp.replace(k, v)
        out.append(comp)
    return VectorFieldExpr(CHART, out)


def test_contact_pair_examples():
    pair = representation(1).pair()
    v = verify_contact_pair(pair)
    assert v.ok and v.details["type"] == [1, 0] and v.details["beta_nilpotent"]["ok"]
    bad = ContactPair(DifferentialForm.basis(CHART, "x1"), DifferentialForm.basis(CHART, "x2"), 1, 0)
    v = verify_contact_pair(bad)
    assert not v.ok and v.details["min_abs_top"] == 0.0


def test_non_closed_beta_rejected():
    pair = ContactPair(representation(1).coframe[1], DifferentialForm.one_form(CHART, ["0", "0", "x1", "0"]), 1, 0)
    v = verify_contact_pair(pair)
    assert not v.ok and not v.details["beta_nilpotent"]["ok"]


def test_dimension_mismatch():
    with pytest.raises(ContactError):
        ContactPair(DifferentialForm.basis(CHART, "x1"), DifferentialForm.basis(CHART, "x2"), 0, 0)


def test_reeb_fields_at_origin():
    A, B = reeb_fields(representation(1).pair(), np.zeros(4))
    assert np.allclose(A, [1, 0, 0, 0]) and np.allclose(B, [0, 0, 1, 0])


@pytest.mark.parametrize("rid", REPRESENTATIONS)
def test_reeb_fields_random_points(rid):
    pair = representation(rid).pair()
    rng = sample_rng(17)
    for _ in range(50):
        x = rng.uniform(-2, 2, 4)
        A, B = reeb_fields(pair, x)
        res = reeb_residuals(pair, x, A, B)
        assert max(res.values()) <= 1e-10


def test_reeb_rank_deficient():
    bad = ContactPair(DifferentialForm.basis(CHART, "x1"), DifferentialForm.basis(CHART, "x2"), 1, 0)
    with pytest.raises(RankDeficient):
        reeb_fields(bad, np.zeros(4))


@pytest.mark.parametrize("rid", REPRESENTATIONS)
def test_construction_matches_display(rid):
    rep = representation(rid)
    want = DifferentialForm.parse(CHART, 2, OMEGA[rid])
    assert rep.omega == want
    S = lcs_from_pair(rep.pair(), 1)
    assert S.omega == want and S.theta == rep.coframe[3]
    assert check_construction(rep).ok and check_duality(rep).ok


@pytest.mark.parametrize("rid", REPRESENTATIONS)
def test_top_power_nonzero(rid):
    S = builtin_structure(rid)
    top = wedge(S.omega, S.omega).coeff(0, 1, 2, 3)
    rng = sample_rng(5)
    for _ in range(20):
        x = dict(zip(CHART.coords, rng.uniform(-2, 2, 4)))
        assert abs(top.evaluate(x)) > 1e-12
    dec = top_power_decomposition(representation(rid).pair(), 3)
    assert dec["identity_holds"]


def test_small_c_is_degenerate():
    with pytest.raises(DegeneracyDetected) as info:
        lcs_from_pair(representation(1).pair(), 0)
    assert "second" in info.value.details


def test_nondegeneracy_profile_grows_with_c():
    prof = nondegeneracy_profile(representation(1).pair(), [0.5, 1, 2])
    vals = [p["min_abs_det"] for p in prof]
    assert np.allclose(vals, [0.25, 1.0, 4.0])


def test_lee_field_not_an_automorphism():
    S = builtin_structure(1)
    v = verify_lcs_automorphism(S, lee_field(S))
    assert v.ok and v.details["theta_of_X"] == "0" and not v.details["compatible"]
    z = verify_lcs_automorphism(S, VectorFieldExpr.zero(CHART))
    assert z.ok and not z.details["theta_of_X_is_one"]


def test_compatible_automorphism():
    S = builtin_structure(1)
    v = verify_lcs_automorphism(S, VectorFieldExpr.coordinate(CHART, "x3"))
    assert v.ok and v.details["compatible"]
    w = verify_lcs_automorphism(S, VectorFieldExpr(CHART, ["x1", "0", "1", "0"]))
    assert not w.ok


@pytest.mark.parametrize("rid", REPRESENTATIONS)
def test_lie_system_display(rid):
    X = lie_system_field(LieSystemSpec(rid, COEFFS))
    assert X == _display(rid)


def test_lie_system_examples():
    X = lie_system_field(LieSystemSpec("g41-rep1", ["1"] * 4))
    assert np.allclose(X.at(np.zeros(4), 0.0), [1, 1, 1, 1])
    with pytest.raises(UnknownRepresentation):
        representation("g41-rep3")
    with pytest.raises(UnknownIdentifier):
        LieSystemSpec("g41-rep1", ["x1", "0", "0", "0"])
    with pytest.raises(ContactError):
        LieSystemSpec("g41-rep1", ["1", "0", "0"])


def test_constant_coefficient_trajectory():
    X = lie_system_field(LieSystemSpec("g41-rep2", ["1", "2", "3", "1"]))
    tr = integrate(X, [0, 0, 0, 0], 0.0, 1.0, 1e-3)
    # x4 = t, x3 = 3t + t²/2, x2 = 2t + 3t²/2 + t³/6, x1 = t + t² + t³/2 + t⁴/24
    want = [1 + 1 + 0.5 + 1 / 24, 2 + 1.5 + 1 / 6, 3.5, 1.0]
    assert np.max(np.abs(tr.final - want)) <= 1e-10


@pytest.mark.parametrize("rid", REPRESENTATIONS)
def test_bracket_table_is_g41_up_to_relabelling(rid):
    rep = representation(rid)
    table = format_table(bracket_table(rep))
    assert table == ["[X1,X3] = X2", "[X3,X4] = -X1"]
    assert not check_g41(rep).ok
    perm, signs = find_g41_basis(rep)
    assert perm == (3, 2, 1, 4) and signs == (1, 1, -1, 1)


def test_matrix_of_builtin_is_antisymmetric():
    m = form_matrix_at(builtin_structure(4).omega, [0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(m, -m.T)
