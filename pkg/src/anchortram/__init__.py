"""Distributional anchor regression with transformation models.

Conditional distributions are modeled as F_Z(h(y | x)) with a monotone
transformation h(y | x) = b(y)'theta - x'beta, estimated by censored maximum
likelihood.  Causal regularization penalizes the anchor-projected score
residuals, trading in-distribution fit for robustness against shift
perturbations that act through exogenous anchor variables.
"""

__version__ = "0.1.0"

from .anchor import (
    AnchorLossValue,
    AnchorProjection,
    anchor_loss,
    build_projection,
    closed_form_linear_anchor,
    l2_anchor_loss,
    residual_anchor_correlation,
)
from .basis import (
    BernsteinBasis,
    Constraint,
    LinearBasis,
    OrdinalBasis,
    eval_basis,
    eval_basis_deriv,
    is_feasible,
    reparam_to_feasible,
    theta_from_true_h,
)
from .distributions import (
    DISTRIBUTIONS,
    STD_LOGISTIC,
    STD_MEV,
    STD_NORMAL,
    get_distribution,
)
from .evaluation import (
    LoeoResult,
    MetricReport,
    ape,
    conditional_median,
    loeo_cv,
    metric_report,
    nll_contributions,
    worst_case_curve,
)
from .optim import FitConfig, FitResult, fit_anchor, fit_mle, fit_path
from .sem import (
    DoIntervention,
    PushIntervention,
    ScenarioConfig,
    SemSpec,
    invert_monotone,
    make_scenario,
    sample,
    scenario_iv1,
    scenario_iv2,
    scenario_la,
    scenario_nla,
)
from .tram import (
    CensoredObservation,
    Dataset,
    ModelSpec,
    ParamVector,
    bernstein_support_from_data,
    c_logit_model,
    c_probit_model,
    cdf_conditional,
    exact_dataset,
    lm_model,
    load_model,
    loglik,
    loglik_contributions,
    loglik_grad,
    o_logit_model,
    ordinal_dataset,
    save_model,
    score_residuals,
    transformation,
)
