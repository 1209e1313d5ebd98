# tests/test_reductions.py

from fractions import Fraction

import pytest

from qp_recast.errors import (
    BadMode,
    DegenerateSystem,
    DimensionMismatch,
    NotApplicable,
    NotStandardized,
)
from qp_recast.exactalg import RMatrix, rank
from qp_recast.qpmodel import (
    QPSystem,
    Quadrature,
    canonicalize,
    class_invariant,
    is_standard,
    nonlinear_term_count,
)
from qp_recast.reductions import (
    EmbedMode,
    ReductionReport,
    first_integrals_from_M,
    forward_log_map,
    lv_first_integrals,
    maximize_rank_A,
    maximize_rank_B,
    maximize_rank_M,
    rederive,
    reduce_to_m_ge_n,
    standardize,
    step_report,
    to_lotka_volterra,
    to_unimonomial,
    verify_projection_invariance,
)
from qp_recast.transforms import StepKind, TransformStep

MORSE_LV_REDUCED_B = RMatrix([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, -1, 2], [1, -1, 0]])
MORSE_LV_REDUCED_A = RMatrix([[-1, 1, 2, -6, 0], [-1, 1, 0, 0, 0], [0, 0, -2, 6, -1]])


def _span(vectors):
    return rank(RMatrix([list(v) for v in vectors]))


def _same_span(first, second):
    return _span(first) == _span(second) == _span(list(first) + list(second))


# ===================================================================
# EMBED MODES
# ===================================================================
@pytest.mark.unit
@pytest.mark.parametrize(
    "text, kind, k",
    [
        (None, "none", None),
        ("none", "none", None),
        ("FULL", "full", None),
        ("partial=2", "partial", 2),
    ],
)
def test_embed_mode_parse(text, kind, k):
    mode = EmbedMode.parse(text)
    assert (mode.kind, mode.k) == (kind, k)


@pytest.mark.unit
@pytest.mark.parametrize("text", ["half", "partial", "partial=x"])
def test_embed_mode_parse_rejects_unknown_modes(text):
    with pytest.raises(BadMode):
        EmbedMode.parse(text)


@pytest.mark.unit
def test_embed_mode_added_count():
    assert EmbedMode.parse("full").added_count(3, 5) == 2
    assert EmbedMode.parse("partial=1").added_count(3, 5) == 1
    with pytest.raises(BadMode):
        EmbedMode.parse("partial=2").added_count(3, 5)
    with pytest.raises(BadMode):
        EmbedMode.parse("partial=0").added_count(3, 5)


# ===================================================================
# RANK(M) INTEGRALS AND STANDARDIZATION STAGES
# ===================================================================
@pytest.mark.unit
def test_first_integrals_from_M_morse_lv(morse_lv):
    """
    GIVEN the five-variable Lotka-Volterra form of the Morse system, rank(M) = 3
    WHEN the rank(M) dependencies are read off
    THEN two integrals over y1..y5 come back, with constants only when levels are given
    """
    integrals = first_integrals_from_M(morse_lv)
    assert [fi.exponents for fi in integrals] == [(1, -1, 2, -1, 0), (1, -1, 0, 0, -1)]
    assert all(fi.constant is None for fi in integrals)
    assert integrals[0].over == morse_lv.var_names
    assert "y4" in integrals[0].label

    with_levels = first_integrals_from_M(morse_lv, levels=[2, 1])
    assert [fi.constant for fi in with_levels] == [Fraction(1, 2), Fraction(1)]


@pytest.mark.unit
def test_first_integrals_from_M_full_rank(brusselator):
    assert first_integrals_from_M(brusselator) == []


@pytest.mark.unit
def test_reduce_to_m_ge_n_splits_off_a_quadrature():
    """
    GIVEN two variables driven by the single quasimonomial x1 x2
    WHEN reduce_to_m_ge_n rotates the kernel of B away
    THEN one variable remains and the other becomes a quadrature
    """
    sys = QPSystem.from_lists([0, 0], [[1], [1]], [[1, 1]])
    report = reduce_to_m_ge_n(sys)
    assert report.trace[0].matrix == RMatrix([[1, -1], [0, 1]])
    assert report.output.A == RMatrix([[2]])
    assert report.output.B == RMatrix([[1]])
    assert report.quadratures == (Quadrature("x2", Fraction(0), ((1, (1,)),), ("x1",)),)
    assert report.replays()


@pytest.mark.unit
def test_reduce_to_m_ge_n_not_applicable(brusselator):
    with pytest.raises(NotApplicable):
        reduce_to_m_ge_n(brusselator)


@pytest.mark.unit
def test_maximize_rank_B_decouples_the_kernel():
    sys = QPSystem.from_lists([1, 0], [[1, 2], [0, 1]], [[1, 1], [2, 2]])
    report = maximize_rank_B(sys)
    assert report.output.n == 1
    assert rank(report.output.B) == 1
    assert len(report.quadratures) == 1
    assert report.trace[-1].kind == StepKind.DECOUPLE
    assert report.replays()


@pytest.mark.unit
def test_maximize_rank_M_morse_lv(morse_lv):
    """
    GIVEN the Morse Lotka-Volterra system with rank(M) = 3 < n = 5
    WHEN the two constants of motion are fixed at level 1 and decoupled
    THEN a three-variable system with the known exponent matrix remains
    """
    report = maximize_rank_M(morse_lv)
    out = report.output
    assert out.lam == (0, 0, 1)
    assert out.A == MORSE_LV_REDUCED_A
    assert out.B == MORSE_LV_REDUCED_B
    assert out.var_names == ("y1", "y2", "y3")
    assert len(report.first_integrals) == 2
    assert all(fi.constant == 1 for fi in report.first_integrals)
    assert report.replays()


@pytest.mark.unit
def test_maximize_rank_M_with_levels(morse_lv):
    report = maximize_rank_M(morse_lv, levels=[2, 1])
    # quasimonomial 3 carries y4^1, so its coefficients double
    assert report.output.A.col(3) == (-12, 0, 12)
    assert report.first_integrals[0].constant == Fraction(1, 2)
    with pytest.raises(DimensionMismatch):
        maximize_rank_M(morse_lv, levels=[2])


@pytest.mark.unit
def test_maximize_rank_M_needs_full_rank_B():
    sys = QPSystem.from_lists([1, 0], [[1, 2], [0, 1]], [[1, 1], [2, 2]])
    with pytest.raises(NotApplicable) as excinfo:
        maximize_rank_M(sys)
    assert excinfo.value.stage == "maximize_rank_M"


@pytest.mark.unit
def test_maximize_rank_A_picks_the_first_working_row(rank_deficient_a):
    report = maximize_rank_A(rank_deficient_a)
    (step,) = report.trace
    assert step.kind == StepKind.NEW_TIME
    assert step.row == 0
    assert step.vector == (-1, 0)
    assert report.output.lam == (-1, -1)
    assert is_standard(report.output)


@pytest.mark.unit
def test_maximize_rank_A_needs_full_rank_M(morse_lv):
    with pytest.raises(NotApplicable):
        maximize_rank_A(morse_lv)


# ===================================================================
# STANDARDIZE
# ===================================================================
@pytest.mark.unit
def test_standardize_morse_lv(morse_lv):
    report = standardize(morse_lv)
    assert is_standard(report.output)
    assert report.output.A == MORSE_LV_REDUCED_A
    assert report.output.B == MORSE_LV_REDUCED_B
    assert [fi.exponents for fi in report.first_integrals] == [
        (1, -1, 2, -1, 0),
        (1, -1, 0, 0, -1),
    ]
    assert all(fi.over == morse_lv.var_names for fi in report.first_integrals)
    assert report.replays()
    assert report.rank_summary()["after"] == {"A": 3, "B": 3, "M": 3}


@pytest.mark.unit
def test_standardize_is_identity_on_standard_systems(brusselator, morse):
    for sys in (brusselator, morse):
        report = standardize(sys)
        assert report.is_identity
        assert report.output == sys


@pytest.mark.unit
def test_standardize_chains_stages(rank_deficient_a):
    sys = QPSystem.from_lists([0, 0], [[1], [1]], [[1, 1]])
    report = standardize(sys)
    assert is_standard(report.output)
    assert len(report.quadratures) == 1
    assert standardize(rank_deficient_a).trace[0].stage == "maximize_rank_A"


@pytest.mark.unit
def test_standardize_of_a_linear_system_is_degenerate():
    """
    GIVEN a system without any quasimonomial
    WHEN standardization is attempted
    THEN DegenerateSystem is raised, tagged with the stage that hit it
    """
    sys = QPSystem.from_lists([1, 2], [], [])
    with pytest.raises(DegenerateSystem) as excinfo:
        standardize(sys)
    assert excinfo.value.stage == "reduce_to_m_ge_n"


@pytest.mark.unit
def test_forward_log_map_tracks_quasimonomial_and_decouple_steps(morse_lv):
    report = maximize_rank_M(morse_lv)
    F = forward_log_map(report.trace, morse_lv.n)
    assert F.shape == (3, 5)
    assert F == RMatrix.identity(5).take_rows(range(3))


@pytest.mark.unit
def test_report_then_requires_matching_ends(brusselator, morse):
    with pytest.raises(DimensionMismatch):
        ReductionReport.identity(brusselator).then(ReductionReport.identity(morse))


# ===================================================================
# LOTKA-VOLTERRA
# ===================================================================
@pytest.mark.unit
def test_full_lotka_volterra_morse(morse, morse_lv):
    """
    GIVEN the Morse system (n = 3, m = 5)
    WHEN it is brought to Lotka-Volterra form with full embedding
    THEN the output is the quadratic system with M' = B.M, completed by e1 and e3,
    AND the Lotka-Volterra integrals over y1..y5 come with constant 1
    """
    report = to_lotka_volterra(morse, EmbedMode.parse("full"))
    assert report.output == morse_lv
    embed = report.trace[0]
    assert embed.kind == StepKind.EMBED_CONSTANTS
    assert embed.matrix.col(0) == (1, 0, 0, 0, 0)
    assert embed.matrix.col(1) == (0, 0, 1, 0, 0)
    assert report.output.M == class_invariant(morse)
    assert [fi.exponents for fi in report.first_integrals] == [
        (1, -1, 2, -1, 0),
        (1, -1, 0, 0, -1),
    ]
    assert all(fi.constant == 1 for fi in report.first_integrals)
    assert report.replays()


@pytest.mark.unit
def test_lotka_volterra_without_embedding(morse):
    report = to_lotka_volterra(morse)
    out = report.output
    assert out.n == 3 and out.m == 5
    assert out.B.take_rows(range(3)).is_identity()
    assert out.var_names == ("y1", "y2", "y3")
    assert report.first_integrals == ()


@pytest.mark.unit
def test_partial_lotka_volterra(morse):
    report = to_lotka_volterra(morse, EmbedMode.parse("partial=1"))
    out = report.output
    assert out.n == 4
    assert out.B.take_rows(range(4)).is_identity()
    assert len(report.first_integrals) == 1
    assert report.first_integrals[0].constant == 1
    assert report.replays()


@pytest.mark.unit
def test_lotka_volterra_modes_are_checked(brusselator):
    with pytest.raises(BadMode) as excinfo:
        to_lotka_volterra(brusselator, EmbedMode.parse("partial=5"))
    assert excinfo.value.stage == "to_lotka_volterra[partial=5]"


@pytest.mark.unit
def test_lotka_volterra_needs_a_standard_system(rank_deficient_a):
    with pytest.raises(NotStandardized):
        to_lotka_volterra(rank_deficient_a)


@pytest.mark.unit
def test_lotka_volterra_of_identity_B_is_identity():
    sys = QPSystem.from_lists([1, 0], [[-1, 0, 1], [0, -1, 1]], [[1, 0], [0, 1], [1, 1]])
    assert is_standard(sys)
    report = to_lotka_volterra(sys, EmbedMode.parse("full"))
    assert not report.is_identity
    lv = QPSystem.from_lists([1, 0], [[-1, 0], [0, -1]], [[1, 0], [0, 1]])
    assert to_lotka_volterra(lv).is_identity


@pytest.mark.unit
def test_lv_first_integrals_exciton(exciton):
    """
    GIVEN the exciton model (n = 3, m = 6)
    WHEN the Lotka-Volterra integrals are computed with pivots favouring y2, y3, y4
    THEN they match the classical exciton integrals up to sign,
    AND the default pivots span the same lattice
    """
    favoured = lv_first_integrals(exciton, [1, 2, 3, 0, 4, 5])
    assert [fi.exponents for fi in favoured] == [
        (-1, 0, Fraction(-1, 2), 0, 0, 0),
        (0, 1, Fraction(1, 2), Fraction(1, 2), -1, 0),
        (0, 1, Fraction(-1, 2), Fraction(3, 2), 0, -1),
    ]
    default = lv_first_integrals(exciton)
    assert len(default) == 3
    assert _same_span(
        [fi.exponents for fi in default], [fi.exponents for fi in favoured]
    )
    assert default[0].over == ("y1", "y2", "y3", "y4", "y5", "y6")


@pytest.mark.unit
def test_lv_first_integrals_need_more_monomials_than_variables():
    sys = QPSystem.from_lists([0, 0], [[1, 0], [0, 1]], [[1, 0], [0, 1]])
    with pytest.raises(NotApplicable):
        lv_first_integrals(sys)


# ===================================================================
# UNIMONOMIAL
# ===================================================================
@pytest.mark.unit
def test_unimonomial_without_embedding(brusselator):
    report = to_unimonomial(brusselator)
    out = report.output
    assert out.M == RMatrix([[-3, 1, 0, 1, 0], [0, 0, 1, 0, "-1/2"]])
    assert out.var_names == ("z1", "z2")
    assert report.projection is None
    assert report.trace[-1].matrix == RMatrix.diagonal([1, 2])


@pytest.mark.unit
def test_full_unimonomial_brusselator(brusselator):
    """
    GIVEN the Brusselator
    WHEN it is embedded fully and made unimonomial
    THEN A' = I, C is the embedded A and the projection keeps only the first two rows
    """
    report = to_unimonomial(brusselator, EmbedMode.parse("full"))
    out = report.output
    assert out.lam == (-3, 0, 0, 0)
    assert out.A.is_identity()
    assert out.B == RMatrix([[1, 2, 1, -1], [1, -2, 1, 1], [-1, 0, -1, 0], [2, 0, 2, 0]])
    assert report.projection.P == RMatrix(
        [[1, 0, 1, 0], [0, 1, 0, "-1/2"], [0, 0, 0, 0], [0, 0, 0, 0]]
    )
    assert verify_projection_invariance(report).ok
    assert report.replays()


@pytest.mark.unit
@pytest.mark.parametrize(
    "priority, P",
    [
        (None, [[1, 0, 1], [0, 1, 0], [0, 0, 0]]),
        ([0, 1, 3, 2], [[1, 0, 0], [0, 1, "-1/2"], [0, 0, 0]]),
    ],
)
def test_partial_unimonomial_brusselator(brusselator, priority, P):
    report = to_unimonomial(brusselator, EmbedMode.parse("partial=1"), priority)
    assert report.output.n == 3
    assert report.projection.P == RMatrix(P)
    assert bool(verify_projection_invariance(report))


@pytest.mark.unit
def test_projection_invariance_can_fail_for_hand_picked_rows(brusselator):
    """
    GIVEN embedding rows chosen by hand instead of from unassigned quasimonomials
    WHEN the projection is checked
    THEN the spurious row is reported
    """
    rows = RMatrix([[0, 1, 0, 0, 0], [0, 0, 0, 0, 1]])
    report = to_unimonomial(brusselator, extra_rows=rows)
    finding = verify_projection_invariance(report)
    assert not finding
    assert finding.rows == (2,)
    assert "2" in str(finding)


@pytest.mark.unit
def test_three_wave_term_counts(three_wave):
    assert nonlinear_term_count(to_unimonomial(three_wave).output) == 6
    assert nonlinear_term_count(to_unimonomial(three_wave, EmbedMode.parse("full")).output) == 4


@pytest.mark.unit
def test_unimonomial_needs_a_standard_system(rank_deficient_a, brusselator):
    with pytest.raises(NotStandardized) as excinfo:
        to_unimonomial(rank_deficient_a)
    assert excinfo.value.stage == "to_unimonomial[none]"
    with pytest.raises(NotApplicable):
        verify_projection_invariance(to_unimonomial(brusselator))


@pytest.mark.unit
def test_step_report_records_a_single_step(brusselator):
    step = TransformStep(StepKind.NEW_TIME, vector=(-1, 0))
    report = step_report(brusselator, step, "newtime")
    assert len(report.trace) == 1
    assert report.trace[0].stage == "newtime"
    assert report.trace[0].dims_before == (2, 4)
    assert report.replays()


# ===================================================================
# CANONICAL INPUT, LEVELS AND RECIPES
# ===================================================================
def _redundant_system():
    """Quasimonomial 0 has a zero A column and rows 1 and 3 share exponents."""
    return QPSystem.from_lists(
        [1, -1],
        [[0, 1, 0, 1], [0, 0, 1, 1]],
        [[1, 1], [0, 1], [1, 0], [0, 1]],
    )


@pytest.mark.unit
def test_pipelines_merge_a_non_canonical_input_first():
    """
    GIVEN a standard-looking system with a dead quasimonomial and a repeated exponent row
    WHEN each pipeline runs on it
    THEN the merge is the first recorded step and the outputs are the true canonical forms
    """
    sys = _redundant_system()
    canon = canonicalize(sys)
    assert canon.A == RMatrix([[2, 0], [1, 1]])
    assert canon.B == RMatrix([[0, 1], [1, 0]])

    std = standardize(sys)
    assert [step.kind for step in std.trace] == [StepKind.CANONICALIZE]
    assert std.output == canon

    lv = to_lotka_volterra(sys, EmbedMode.parse("full"))
    assert lv.trace[0].kind == StepKind.CANONICALIZE
    assert lv.output.B.is_identity()
    assert (lv.output.n, lv.output.m) == (2, 2)
    assert lv.output.A == RMatrix([[1, 1], [2, 0]])
    assert lv.output.lam == (-1, 1)
    assert lv.replays()

    um = to_unimonomial(sys)
    assert um.trace[0].kind == StepKind.CANONICALIZE
    assert um.output.A.is_identity()
    assert um.output.B == RMatrix([[1, 1], [2, 0]])
    assert um.output.lam == (Fraction(1, 2), Fraction(-3, 2))
    assert um.replays()


@pytest.mark.unit
def test_exciton_lotka_volterra_matrix_is_B_times_M(exciton):
    out = to_lotka_volterra(exciton, EmbedMode.parse("full")).output
    assert out.B.is_identity()
    assert out.M == class_invariant(exciton)
    assert out.lam == (0,) * 6
    assert out.A.row(0) == (-1, 1, 0, 0, 0, 0)
    assert out.A.row(3) == (0, 0, 0, 0, -2, 2)


@pytest.mark.unit
def test_maximize_rank_M_raises_when_merged_terms_cancel():
    """
    GIVEN x1' = x1 (1 + x1 - x1 x2), x2' = 0, so x2 is a constant of motion
    WHEN x2 is fixed at 1 and decoupled
    THEN the two quasimonomials merge and cancel, and DegenerateSystem is raised
    """
    sys = QPSystem.from_lists([1, 0], [[1, -1], [0, 0]], [[1, 0], [1, 1]])
    assert sys.rank_summary() == {"A": 1, "B": 2, "M": 1}
    with pytest.raises(DegenerateSystem) as excinfo:
        maximize_rank_M(sys)
    assert excinfo.value.stage == "maximize_rank_M"
    with pytest.raises(DegenerateSystem):
        standardize(sys)


@pytest.mark.unit
def test_standardize_with_levels(morse_lv):
    report = standardize(morse_lv, levels=["2", 1])
    assert [fi.constant for fi in report.first_integrals] == [Fraction(1, 2), 1]
    assert report.output.A.col(3) == (-12, 0, 12)
    assert report.recipe.levels == (2, 1)
    assert report.replays()


@pytest.mark.unit
@pytest.mark.parametrize("levels, stage", [([2], "maximize_rank_M"), ([2, 1, 3], "standardize")])
def test_standardize_rejects_level_counts_that_do_not_fit(morse_lv, levels, stage):
    with pytest.raises(DimensionMismatch) as excinfo:
        standardize(morse_lv, levels=levels)
    assert excinfo.value.stage == stage


@pytest.mark.unit
def test_rederive_reproduces_every_pipeline(morse_lv, morse, brusselator):
    reports = [
        standardize(morse_lv, levels=[2, 1]),
        to_lotka_volterra(morse, EmbedMode.parse("partial=1"), [1, 0]),
        to_unimonomial(brusselator, extra_rows=RMatrix([[0, 1, 0, 0, 0]])),
        step_report(brusselator, TransformStep(StepKind.NEW_TIME, vector=(-1, 0)), "newtime"),
    ]
    for report in reports:
        assert rederive(report) == report
    with pytest.raises(NotApplicable):
        rederive(ReductionReport.identity(morse))
