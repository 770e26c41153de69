"""Named experiment presets, written in the same TOML syntax users write.

Budgets (T, and thus score calls = T * S) are picked so that the proximal
runs visibly reach their plateau on a laptop; each description states it.
"""
from ..errors import UnknownPreset
from .config import parse_config

_GAUSS_ALGO = """
[algo]
algo = ["proximal_sm", "advi"]
T = 500
N = 20
S = 1
learning_rate = 0.005
advi_learning_rate = 0.01
reset_inner_optimizer = true
"""

_MOG_ALGO = """
[algo]
algo = ["proximal_sm", "advi"]
T = {T}
N = 20
S = {S}
learning_rate = 0.01
advi_learning_rate = 0.01
schedule = {schedule}
"""

_PRESETS = {
    "gauss_d3": """
[run]
name = "gauss_d3"
description = "Random Gaussian target in 3 dimensions, full-covariance Gaussian q; 500 score calls."
[target]
kind = "gaussian"
dim = 3
[family]
family = "gauss_full"
[metrics]
which = ["fkl", "param_err"]
every_k_outer = 5
""" + _GAUSS_ALGO,
    "gauss_small_eig": """
[run]
name = "gauss_small_eig"
description = "As gauss_d3 but q starts with covariance 1e-4 * I; 500 score calls."
[target]
kind = "gaussian"
dim = 3
[family]
family = "gauss_full"
init = "small_eig"
small_eig_value = 1e-4
[metrics]
which = ["fkl", "param_err"]
every_k_outer = 5
""" + _GAUSS_ALGO,
    "mog2_match": """
[run]
name = "mog2_match"
description = "Order-2 mixture target in 3 dimensions fitted by an order-2 diagonal mixture; 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 3
order = 2
[family]
family = "gauss_mixture"
K = 2
[metrics]
which = ["fkl"]
every_k_outer = 20
""" + _MOG_ALGO.format(T=2000, S=1, schedule='"linear"'),
    "mog3_mismatch": """
[run]
name = "mog3_mismatch"
description = "Order-2 mixture target fitted by an order-3 diagonal mixture (one surplus component); 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 3
order = 2
[family]
family = "gauss_mixture"
K = 3
[metrics]
which = ["fkl"]
every_k_outer = 20
""" + _MOG_ALGO.format(T=2000, S=1, schedule='"linear"'),
    "mog5": """
[run]
name = "mog5"
description = "Order-5 mixture target in 3 dimensions fitted by an order-5 diagonal mixture; 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 3
order = 5
[family]
family = "gauss_mixture"
K = 5
[metrics]
which = ["fkl"]
every_k_outer = 20
""" + _MOG_ALGO.format(T=2000, S=1, schedule='"linear"'),
    "mog_d30": """
[run]
name = "mog_d30"
description = "Order-2 mixture target in 30 dimensions fitted by an order-2 diagonal mixture; 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 30
order = 2
[family]
family = "gauss_mixture"
K = 2
[metrics]
which = ["fkl"]
every_k_outer = 20
fkl_samples = 500
""" + _MOG_ALGO.format(T=2000, S=1, schedule='"linear"'),
    "mismatch_gauss_q": """
[run]
name = "mismatch_gauss_q"
description = "Order-2 mixture target in 3 dimensions fitted by a single full-covariance Gaussian; 2000 score calls for both methods."
[target]
kind = "gaussian_mixture"
dim = 3
order = 2
[family]
family = "gauss_full"
[metrics]
which = ["fkl"]
every_k_outer = 20
[algo]
algo = ["proximal_sm", "advi"]
T = 2000
N = 20
S = 1
learning_rate = 0.001
advi_learning_rate = 0.01
""",
    "noise_sweep": """
[run]
name = "noise_sweep"
description = "Gaussian target in 3 dimensions with noisy scores, beta in {0, 0.5, 1, 2, 4}; 4000 score calls per run."
[target]
kind = "gaussian"
dim = 3
[noise]
beta = [0.0, 0.5, 1.0, 2.0, 4.0]
[family]
family = "gauss_full"
[metrics]
which = ["nelbo", "fkl"]
every_k_outer = 100
[algo]
algo = ["proximal_sm", "advi"]
T = 4000
N = 20
S = 1
learning_rate = 0.0002
advi_learning_rate = 0.01
""",
    "ablation_alpha": """
[run]
name = "ablation_alpha"
description = "Order-5 mixture target with the proximal term on (linear schedule) and off (alpha = 0); final forward KL after 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 3
order = 5
[family]
family = "gauss_mixture"
K = 5
[metrics]
which = ["fkl"]
every_k_outer = 100
fkl_samples = 2000
[algo]
algo = "proximal_sm"
T = 2000
N = 20
S = 1
learning_rate = 0.01
schedule = ["linear", "zero"]
""",
    "ablation_S": """
[run]
name = "ablation_S"
description = "Order-5 mixture target with S in {1, 5, 10, 20}; first outer iteration with forward KL below 0.05 within 2000 iterations."
[target]
kind = "gaussian_mixture"
dim = 3
order = 5
[family]
family = "gauss_mixture"
K = 5
[metrics]
which = ["fkl"]
every_k_outer = 1
[algo]
algo = "proximal_sm"
T = 2000
N = 20
S = [1, 5, 10, 20]
learning_rate = 0.01
""",
    "blr_minibatch": """
[run]
name = "blr_minibatch"
description = "Bayesian logistic regression on 200 synthetic points (10 features) with mini-batches of 20; 1000 outer iterations."
[target]
kind = "bayes_logistic"
n = 200
n_test = 200
features = 10
batch_size = 20
[family]
family = "gauss_diag"
[metrics]
which = ["nelbo", "nll", "ece"]
every_k_outer = 20
posterior_predictive_samples = 20
[algo]
algo = ["proximal_sm", "advi"]
T = 1000
N = 20
S = 1
learning_rate = 0.005
advi_learning_rate = 0.01
reset_inner_optimizer = true
""",
    "mlp_lowdata": """
[run]
name = "mlp_lowdata"
description = "Tanh MLP (4-8-3) on 60 synthetic training points, held-out set of 600; 1000 outer iterations with full-data scores."
[target]
kind = "bayes_mlp"
n = 60
n_test = 600
features = 4
hidden_dim = 8
classes = 3
[family]
family = "gauss_diag"
[metrics]
which = ["nelbo", "nll", "ece"]
every_k_outer = 20
posterior_predictive_samples = 20
[algo]
algo = ["proximal_sm", "advi"]
T = 1000
N = 20
S = 1
learning_rate = 0.005
advi_learning_rate = 0.01
reset_inner_optimizer = true
""",
    "flow_d1": """
[run]
name = "flow_d1"
description = "Order-2 mixture target in 1 dimension fitted by a single planar flow layer; 2000 score calls."
[target]
kind = "gaussian_mixture"
dim = 1
order = 2
[family]
family = "planar_flow"
[metrics]
which = ["fkl"]
every_k_outer = 20
""" + _MOG_ALGO.format(T=2000, S=1, schedule='"linear"'),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_text(name):
    if name not in _PRESETS:
        raise UnknownPreset(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return _PRESETS[name].strip() + "\n"


def preset(name):
    return parse_config(preset_text(name))
