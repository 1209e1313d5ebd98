# qp_recast/reductions.py

"""
Reduction pipelines built from the primitive transforms.

  standardize         -- m >= n and rank(A) = rank(B) = rank(M) = n
  to_lotka_volterra   -- B = I (quadratic vector field), optional embedding
  to_unimonomial      -- one quasimonomial per equation, optional embedding

Every pipeline returns a ReductionReport whose trace replays exactly.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import (
    BadMode,
    DegenerateSystem,
    DimensionMismatch,
    NoSuitableRow,
    NotApplicable,
    NotStandardized,
    RecastError,
    SingularBlock,
)
from .exactalg import (
    RMatrix,
    inverse,
    kernel_basis,
    rank,
    rational_vector,
    row_dependencies,
    select_independent_rows,
)
from .qpmodel import (
    FirstIntegral,
    Quadrature,
    QPSystem,
    default_names,
    is_canonical,
    is_standard,
    validate,
)
from .transforms import (
    MONOMIALS,
    VARIABLES,
    ProjectionOperator,
    StepKind,
    TransformStep,
    apply_step,
    projection_for,
    replay,
    stamp,
)

logger = logging.getLogger(__name__)

STANDARDIZE = "standardize"
LOTKA_VOLTERRA = "to_lotka_volterra"
UNIMONOMIAL = "to_unimonomial"
SINGLE_STEP = "step"
PIPELINES = (STANDARDIZE, LOTKA_VOLTERRA, UNIMONOMIAL, SINGLE_STEP)


@dataclass(frozen=True)
class Recipe:
    """The pipeline call behind a report, enough to derive the report again."""

    pipeline: str
    embed: str = None
    priority: tuple = None
    levels: tuple = None
    extra_rows: RMatrix = None


@dataclass(frozen=True)
class ReductionReport:
    input: QPSystem
    output: QPSystem
    trace: tuple = ()
    quadratures: tuple = ()
    first_integrals: tuple = ()
    projection: ProjectionOperator = None
    recipe: Recipe = None

    @classmethod
    def identity(cls, sys):
        return cls(sys, sys)

    @property
    def is_identity(self):
        return not self.trace

    def replays(self):
        return replay(self.input, self.trace) == self.output

    def rank_summary(self):
        return {"before": self.input.rank_summary(), "after": self.output.rank_summary()}

    def then(self, other, integrals=None):
        """Chain a report that starts where this one ends."""
        if other.input != self.output:
            raise DimensionMismatch("report", "chained report does not start at this output")
        return ReductionReport(
            self.input,
            other.output,
            self.trace + other.trace,
            self.quadratures + other.quadratures,
            self.first_integrals
            + tuple(other.first_integrals if integrals is None else integrals),
            other.projection or self.projection,
        )


@dataclass(frozen=True)
class EmbedMode:
    kind: str = "none"
    k: int = None

    NONE = "none"
    PARTIAL = "partial"
    FULL = "full"

    @classmethod
    def parse(cls, text):
        """Read 'none', 'full' or 'partial=k'."""
        text = (text or "none").strip().lower()
        if text in (cls.NONE, cls.FULL):
            return cls(text)
        if text.startswith("partial="):
            try:
                return cls(cls.PARTIAL, int(text.split("=", 1)[1]))
            except ValueError:
                pass
        raise BadMode(f"embed mode '{text}' is not none, full or partial=k")

    def added_count(self, n, m):
        """Number of variables the embedding adds to an n-variable, m-monomial system."""
        if self.kind == self.NONE:
            return 0
        if self.kind == self.FULL:
            return m - n
        if self.k is None or not 1 <= self.k < m - n:
            raise BadMode(f"partial={self.k} needs 1 <= k < m - n = {m - n}")
        return self.k

    def __str__(self):
        return f"partial={self.k}" if self.kind == self.PARTIAL else self.kind


@dataclass(frozen=True)
class InvarianceFinding:
    """Outcome of the projection check; falsy when spurious rows were found."""

    rows: tuple = field(default=())

    @property
    def ok(self):
        return not self.rows

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        return "projection rows " + ", ".join(str(r) for r in self.rows) + " are not zero"


class _Pipeline:
    """Applies steps to a running system and collects what a report needs."""

    def __init__(self, sys, stage):
        self.input = sys
        self.current = sys
        self.stage = stage
        self.trace = []
        self.quadratures = []
        self.first_integrals = []
        self.projection = None

    def apply(self, step):
        step = replace(step, stage=self.stage)
        after = apply_step(self.current, step)
        self.trace.append(stamp(step, self.current, after))
        self.current = after
        return after

    def quasimonomial(self, C, names=None):
        if C.is_identity() and names is None:
            return self.current
        return self.apply(TransformStep(StepKind.QUASIMONOMIAL, matrix=C, names=names))

    def permute(self, axis, order):
        order = tuple(order)
        if order == tuple(range(len(order))):
            return self.current
        return self.apply(TransformStep(StepKind.PERMUTE, order=order, axis=axis))

    def canonical(self):
        """Merge the running system into canonical form, as a recorded step."""
        validate(self.current)
        if is_canonical(self.current):
            return self.current
        logger.info(f"{self.stage}: input is not canonical, merging quasimonomials")
        return self.apply(TransformStep(StepKind.CANONICALIZE))

    def report(self, recipe=None):
        logger.info(
            f"{self.stage}: (n,m) ({self.input.n},{self.input.m}) -> "
            f"({self.current.n},{self.current.m}) in {len(self.trace)} steps"
        )
        return ReductionReport(
            self.input,
            self.current,
            tuple(self.trace),
            tuple(self.quadratures),
            tuple(self.first_integrals),
            self.projection,
            recipe,
        )


@contextmanager
def _stage(name):
    """Tag errors escaping a stage with the stage name."""
    try:
        yield
    except RecastError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
        raise


def _visit_order(priority, count):
    if priority is None:
        return list(range(count))
    priority = [int(i) for i in priority]
    if len(set(priority)) != len(priority) or any(not 0 <= i < count for i in priority):
        raise DimensionMismatch(
            "priority", f"{priority} is not a list of distinct indices below {count}"
        )
    return priority + [i for i in range(count) if i not in priority]


def _leading_first(chosen, count):
    return list(chosen) + [i for i in range(count) if i not in chosen]


def _require_standard(sys):
    validate(sys)
    if not is_standard(sys):
        ranks = sys.rank_summary()
        raise NotStandardized(
            f"n={sys.n} m={sys.m} rank(A)={ranks['A']} rank(B)={ranks['B']} "
            f"rank(M)={ranks['M']}: run standardize first"
        )


# ===================================================================
# RANK(M) INTEGRALS
# ===================================================================
def first_integrals_from_M(sys, levels=None):
    """
    When rank(M) = r < n every non-pivot row k of M is a combination of the
    pivot rows, and x_k^-1 prod x_i^gamma_ki is conserved. `levels` are the
    values of the decoupled constants, giving each integral the constant 1/level.
    """
    M = sys.M
    pivots = select_independent_rows(M)
    if len(pivots) == sys.n:
        return []
    gamma, others = row_dependencies(M, pivots)
    levels = list(levels) if levels is not None else [None] * len(others)
    integrals = []
    for t, k in enumerate(others):
        exponents = [Fraction(0)] * sys.n
        for i, p in enumerate(pivots):
            exponents[p] = gamma[t, i]
        exponents[k] -= 1
        constant = 1 / Fraction(levels[t]) if levels[t] is not None else None
        integrals.append(
            FirstIntegral(
                tuple(exponents),
                constant,
                f"rank(M) dependency of {sys.var_names[k]}",
                sys.var_names,
            )
        )
    logger.info(f"rank(M)={len(pivots)} < n={sys.n}: {len(integrals)} first integrals")
    return integrals


# ===================================================================
# STANDARDIZATION STAGES
# ===================================================================
def _decouple_kernel(sys, stage):
    """
    Rotate the kernel of B onto the trailing variables with
    C = [[I_r, K_top], [0, I]] and split them off as quadratures.
    """
    pipe = _Pipeline(sys, stage)
    r = rank(sys.B)
    if r == sys.n:
        return pipe.report()
    if r == 0:
        raise DegenerateSystem("no quasimonomials left: every variable is a linear quadrature")
    pivots = select_independent_rows(sys.B.transpose())
    pipe.permute(VARIABLES, _leading_first(pivots, sys.n))
    current = pipe.current
    kernel = kernel_basis(current.B)
    identity_part = [tuple(Fraction(int(i == j)) for i in range(sys.n)) for j in range(r)]
    C = RMatrix.from_columns(identity_part + kernel, rows=sys.n)
    current = pipe.quasimonomial(C)
    retained = current.var_names[:r]
    for k in range(r, sys.n):
        terms = tuple(
            (current.A[k, j], current.B.row(j)[:r])
            for j in range(current.m)
            if current.A[k, j] != 0
        )
        pipe.quadratures.append(
            Quadrature(current.var_names[k], current.lam[k], terms, retained)
        )
    pipe.apply(TransformStep(StepKind.DECOUPLE, retained=r))
    return pipe.report()


def reduce_to_m_ge_n(sys):
    validate(sys)
    if sys.m >= sys.n:
        raise NotApplicable(f"m={sys.m} >= n={sys.n}")
    with _stage("reduce_to_m_ge_n"):
        return _decouple_kernel(sys, "reduce_to_m_ge_n")


def maximize_rank_B(sys):
    validate(sys)
    with _stage("maximize_rank_B"):
        return _decouple_kernel(sys, "maximize_rank_B")


def maximize_rank_M(sys, levels=None):
    """
    C^-1 = [[I_r, 0], [-Gamma, I]] zeroes the dependent
    rows of M; the matching variables are constants of motion, fixed at
    `levels` (default 1) and decoupled.
    """
    validate(sys)
    stage = "maximize_rank_M"
    pipe = _Pipeline(sys, stage)
    with _stage(stage):
        if rank(sys.B) != sys.n:
            raise NotApplicable("rank(B) must be maximal before reducing rank(M)")
        r = rank(sys.M)
        if r == sys.n:
            return pipe.report()
        levels = tuple(levels) if levels is not None else (Fraction(1),) * (sys.n - r)
        if len(levels) != sys.n - r:
            raise DimensionMismatch("levels", f"expected {sys.n - r} levels, got {len(levels)}")
        pipe.first_integrals.extend(first_integrals_from_M(sys, levels))
        pivots = select_independent_rows(sys.M)
        current = pipe.permute(VARIABLES, _leading_first(pivots, sys.n))
        gamma, _ = row_dependencies(current.M, range(r))
        C = RMatrix.identity(r).hstack(RMatrix.zeros(r, sys.n - r)).vstack(
            gamma.hstack(RMatrix.identity(sys.n - r))
        )
        current = pipe.quasimonomial(C)
        if any(x != 0 for k in range(r, sys.n) for x in current.M.row(k)):
            raise NotApplicable("transformed M kept a nonzero dependent row")
        current = pipe.apply(TransformStep(StepKind.DECOUPLE, retained=r, vector=levels))
        if rank(current.B) != current.n:
            raise DegenerateSystem(
                f"merged quasimonomials lowered rank(B) to {rank(current.B)} < n={current.n}"
            )
        return pipe.report()


def maximize_rank_A(sys):
    """New-time step with beta = -B_j for the first row j that makes rank(A) = n."""
    validate(sys)
    stage = "maximize_rank_A"
    pipe = _Pipeline(sys, stage)
    with _stage(stage):
        if rank(sys.M) != sys.n:
            raise NotApplicable("rank(M) must be maximal before reducing rank(A)")
        if rank(sys.A) == sys.n:
            return pipe.report()
        for j in range(sys.m):
            beta = tuple(-b for b in sys.B.row(j))
            step = TransformStep(StepKind.NEW_TIME, vector=beta, row=j)
            if rank(apply_step(sys, step).A) == sys.n:
                logger.debug(f"{stage}: quasimonomial {j} gives rank(A)={sys.n}")
                pipe.apply(step)
                return pipe.report()
        raise NoSuitableRow(f"no exponent row of B lifts rank(A) to n={sys.n}")


def forward_log_map(trace, n):
    """
    F with ln(vars after trace) = F ln(vars before trace), for traces made of
    quasimonomial, permute, decouple and new-time steps.
    """
    F = RMatrix.identity(n)
    for step in trace:
        if step.kind == StepKind.QUASIMONOMIAL:
            F = inverse(step.matrix) @ F
        elif step.kind == StepKind.PERMUTE and step.axis == VARIABLES:
            F = F.take_rows(step.order)
        elif step.kind == StepKind.DECOUPLE:
            F = F.take_rows(range(step.retained))
        elif step.kind in (StepKind.EMBED_CONSTANTS, StepKind.EMBED_DECOUPLED):
            raise NotApplicable("embedded variables are not functions of the input")
    return F


def _over_input(integral, F, names):
    exponents = F.transpose().apply(integral.exponents)
    return replace(integral, exponents=exponents, over=names)


def _take_levels(pending, count):
    """Next `count` constant-of-motion levels, or None for the default of 1."""
    if pending is None:
        return None, None
    if len(pending) < count:
        raise DimensionMismatch(
            "levels", f"{count} constants of motion need levels, {len(pending)} left"
        )
    return pending[:count], pending[count:]


def standardize(sys, levels=None):
    """
    Loop the four stages until m >= n and rank(A) = rank(B) = rank(M) = n.
    Emitted first integrals are rewritten over the input variables.

    `levels` fixes the constants of motion split off by every rank(M) stage,
    in the order they are met; all of them must be used.
    """
    pipe = _Pipeline(sys, STANDARDIZE)
    with _stage(STANDARDIZE):
        pipe.canonical()
    report = pipe.report()
    levels = rational_vector(levels) if levels is not None else None
    pending = levels
    for _ in range(4 * sys.n + 4):
        current = report.output
        if is_standard(current):
            break
        ranks = current.rank_summary()
        if current.m < current.n:
            stage_report = reduce_to_m_ge_n(current)
        elif ranks["B"] < current.n:
            stage_report = maximize_rank_B(current)
        elif ranks["M"] < current.n:
            with _stage("maximize_rank_M"):
                stage_levels, pending = _take_levels(pending, current.n - ranks["M"])
            stage_report = maximize_rank_M(current, stage_levels)
        else:
            stage_report = maximize_rank_A(current)
        F = forward_log_map(report.trace, sys.n)
        integrals = [_over_input(fi, F, sys.var_names) for fi in stage_report.first_integrals]
        report = report.then(stage_report, integrals)
    else:
        raise NotStandardized(f"standard form not reached after {4 * sys.n + 4} stages")
    if pending:
        error = DimensionMismatch("levels", f"{len(pending)} levels were not used")
        error.stage = STANDARDIZE
        raise error
    logger.info(
        f"standardize: n {sys.n} -> {report.output.n}, {len(report.quadratures)} quadratures, "
        f"{len(report.first_integrals)} first integrals"
    )
    return replace(report, recipe=Recipe(STANDARDIZE, levels=levels))


# ===================================================================
# LOTKA-VOLTERRA
# ===================================================================
def _completion_columns(B, order):
    """Standard basis columns e_k, scanned in `order`, that raise rank(B | e_k ...)."""
    chosen = []
    current = B
    r = rank(B)
    for k in order:
        candidate = current.hstack(RMatrix.column([int(i == k) for i in range(B.rows)]))
        if rank(candidate) > r:
            chosen.append(k)
            current = candidate
            r += 1
        if r == B.rows:
            break
    return chosen


def lv_first_integrals(sys, priority=None):
    """
    Integrals over the Lotka-Volterra variables y_j = prod x^B_j:
    alpha_i = B_i (B_nn)^-1 and y_i^-1 prod y_j^alpha_ij is conserved (value 1).
    """
    _require_standard(sys)
    if sys.m == sys.n:
        raise NotApplicable("m = n: the Lotka-Volterra form has no extra integrals")
    pivots = select_independent_rows(sys.B, _visit_order(priority, sys.m))
    block_inverse = inverse(sys.B.take_rows(pivots))
    names = default_names(sys.m, "y")
    integrals = []
    for i in range(sys.m):
        if i in pivots:
            continue
        alpha = block_inverse.transpose().apply(sys.B.row(i))
        exponents = [Fraction(0)] * sys.m
        for p, a in zip(pivots, alpha):
            exponents[p] = a
        exponents[i] -= 1
        integrals.append(
            FirstIntegral(tuple(exponents), Fraction(1), f"alpha of {names[i]}", names)
        )
    return integrals


def _priority_tuple(priority):
    return tuple(int(i) for i in priority) if priority is not None else None


def to_lotka_volterra(sys, mode=None, priority=None):
    mode = mode or EmbedMode()
    stage = f"to_lotka_volterra[{mode}]"
    recipe = Recipe(LOTKA_VOLTERRA, embed=str(mode), priority=_priority_tuple(priority))
    pipe = _Pipeline(sys, stage)
    with _stage(stage):
        base = pipe.canonical()
        _require_standard(base)
        if base.B.is_identity():
            return pipe.report(recipe)
        n, m = base.n, base.m
        p = mode.added_count(n, m)
        order = _visit_order(priority, m)
        if p == 0:
            pivots = select_independent_rows(base.B, order)
            current = pipe.permute(MONOMIALS, _leading_first(pivots, m))
            C = inverse(current.B.take_rows(range(n)))
            pipe.quasimonomial(C, default_names(n, "y"))
            if m > n:
                logger.info(f"{stage}: {m - n} exponent rows stay non-quadratic")
            return pipe.report(recipe)

        extra = _completion_columns(base.B, order)[:p]
        extra_B = RMatrix.from_columns(
            [[int(i == k) for i in range(m)] for k in extra], rows=m
        )
        embedded = pipe.apply(TransformStep(StepKind.EMBED_CONSTANTS, matrix=extra_B))
        if p == m - n:
            pipe.quasimonomial(inverse(embedded.B), default_names(m, "y"))
            pipe.first_integrals.extend(lv_first_integrals(base, priority))
        else:
            pivots = select_independent_rows(embedded.B, order)
            current = pipe.permute(MONOMIALS, _leading_first(pivots, m))
            C = inverse(current.B.take_rows(range(n + p)))
            current = pipe.quasimonomial(C, default_names(n + p, "y"))
            pipe.first_integrals.extend(
                replace(fi, constant=Fraction(1)) for fi in first_integrals_from_M(current)
            )
        return pipe.report(recipe)


# ===================================================================
# UNIMONOMIAL
# ===================================================================
def _unassigned_rows(m, pivots, order, count):
    unassigned = [j for j in order if j not in pivots][:count]
    return RMatrix([[0] + [int(i == j) for i in range(m)] for j in unassigned], cols=m + 1)


def to_unimonomial(sys, mode=None, priority=None, extra_rows=None):
    """
    C = A (square), or an invertible column block of A; with an embedding the
    added decoupled rows (0 | e_j) pick up the unassigned quasimonomials and
    C is the matching block of the embedded A. The log-space projection is
    attached whenever variables were added.
    """
    mode = mode or EmbedMode()
    stage = f"to_unimonomial[{mode}]"
    recipe = Recipe(
        UNIMONOMIAL, embed=str(mode), priority=_priority_tuple(priority), extra_rows=extra_rows
    )
    pipe = _Pipeline(sys, stage)
    with _stage(stage):
        base = pipe.canonical()
        _require_standard(base)
        n, m = base.n, base.m
        order = _visit_order(priority, m)
        pivots = select_independent_rows(base.A.transpose(), order)
        if len(pivots) != n:
            raise SingularBlock(f"A has no invertible {n}x{n} column block")
        if extra_rows is None:
            p = mode.added_count(n, m)
            extra_rows = _unassigned_rows(m, pivots, order, p)
        elif extra_rows.cols != m + 1:
            raise DimensionMismatch("extra_rows", f"expected {m + 1} columns")
        p = extra_rows.rows
        if p:
            embedded = pipe.apply(TransformStep(StepKind.EMBED_DECOUPLED, matrix=extra_rows))
            pivots = select_independent_rows(embedded.A.transpose(), order)
            if len(pivots) != n + p:
                raise SingularBlock(f"embedded A has no invertible {n + p}x{n + p} column block")
        current = pipe.permute(MONOMIALS, _leading_first(pivots, m))
        C = current.A.take_cols(range(n + p))
        pipe.quasimonomial(C, default_names(n + p, "z"))
        if p:
            pipe.projection = projection_for(C, n, n + p)
        return pipe.report(recipe)


def verify_projection_invariance(report):
    """Rows past the retained block of P' must vanish for plain suppression to work."""
    if report.projection is None:
        raise NotApplicable("report carries no projection")
    finding = InvarianceFinding(tuple(report.projection.spurious_rows()))
    if not finding:
        logger.warning(f"projection invariance broken: {finding}")
    return finding


def step_report(sys, step, stage):
    """Report for a single user-supplied step (CLI transform / newtime)."""
    validate(sys)
    pipe = _Pipeline(sys, stage)
    with _stage(stage):
        pipe.apply(step)
    return pipe.report(Recipe(SINGLE_STEP))


def rederive(report):
    """Run the pipeline named by the report's recipe again on its input."""
    recipe = report.recipe
    if recipe is None:
        raise NotApplicable("report carries no recipe")
    sys = report.input
    if recipe.pipeline == STANDARDIZE:
        return standardize(sys, recipe.levels)
    if recipe.pipeline == LOTKA_VOLTERRA:
        return to_lotka_volterra(sys, EmbedMode.parse(recipe.embed), recipe.priority)
    if recipe.pipeline == UNIMONOMIAL:
        return to_unimonomial(
            sys, EmbedMode.parse(recipe.embed), recipe.priority, recipe.extra_rows
        )
    if recipe.pipeline == SINGLE_STEP:
        if len(report.trace) != 1:
            raise DimensionMismatch("trace", "a single-step report holds exactly one step")
        step = report.trace[0]
        return step_report(sys, replace(step, dims_before=None, dims_after=None), step.stage)
    raise BadMode(f"unknown pipeline '{recipe.pipeline}'")
