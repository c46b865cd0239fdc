"""Central finite-difference checks of every parameter class of the model."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .graph import AttributeSchema
from .model import GAANModel, ModelConfig
from .nn import CLASSIFICATION, REGRESSION
from .smiles import parse_smiles

GRADCHECK_SMILES = ("CC(=O)OC1CCC1", "c1ccccc1CCN")
GRADCHECK_ARCH = "GAC(5)-PMF-GAC(4)-PMF-GAC(3)-GMP-Tanh"
TOLERANCE = 1e-4


def parameter_class(name: str) -> str:
    """``gac0.W_V.3`` -> ``W_V``; ``pmf1.alpha`` -> ``alpha``; ``enc.W`` -> ``autoencoder``."""
    parts = name.split(".")
    if parts[0] in ("enc", "dec"):
        return "autoencoder"
    if parts[0] == "head":
        return "head"
    if parts[0].startswith("bn"):
        return f"bn_{parts[1]}"
    return parts[1]


def gradcheck_model(seed: int = 0, step: float = 1e-6, max_entries: int = 6, details: bool = False):
    """Build the fixed 2-graph batch and compare analytic and numeric gradients.

    Returns ``{class: max relative error}`` where the error of a class is
    ``max |analytic - numeric| / max |numeric|`` over the checked entries.
    With ``details`` the per-class gradient scale is returned as well.
    """
    rng = np.random.default_rng(seed)
    graphs = [parse_smiles(s) for s in GRADCHECK_SMILES]
    schema = AttributeSchema.from_graphs(graphs)
    config = ModelConfig(arch=GRADCHECK_ARCH, learnable_lambda=True, lam=0.6,
                         encoder_dim=4, recon_weight=0.3, seed=seed, fold_init=0.8)
    model = GAANModel(config, schema, [CLASSIFICATION, REGRESSION], rng)
    # move lambda and the fold weights off their defaults so no gradient vanishes by symmetry
    params = model.parameters()
    for name, t in params.items():
        if name.endswith((".gamma", ".shift", ".b", ".omega", ".theta", ".alpha", ".beta")) or ".b_" in name:
            t.data = t.data + rng.uniform(-0.3, 0.3, size=t.data.shape)
    labels = np.array([[1.0, 0.7], [0.0, -1.2]])
    batch = model.make_batch(graphs)

    def loss_value():
        return model.loss(batch, labels, training=True, update_stats=False).item()

    model.zero_grad()
    model.loss(batch, labels, training=True, update_stats=False).backward()

    diffs, scales = defaultdict(float), defaultdict(float)
    for name, t in params.items():
        analytic = np.zeros_like(t.data) if t.grad is None else np.asarray(t.grad).reshape(t.data.shape)
        flat = t.data.reshape(-1)
        n = flat.size
        picks = np.arange(n) if n <= max_entries else rng.choice(n, size=max_entries, replace=False)
        cls = parameter_class(name)
        for i in picks:
            orig = t.data.reshape(-1)[i]
            data = t.data.copy().reshape(-1)
            data[i] = orig + step
            t.data = data.reshape(t.data.shape)
            up = loss_value()
            data[i] = orig - step
            t.data = data.reshape(t.data.shape)
            down = loss_value()
            data[i] = orig
            t.data = data.reshape(t.data.shape)
            numeric = (up - down) / (2 * step)
            diffs[cls] = max(diffs[cls], abs(analytic.reshape(-1)[i] - numeric))
            scales[cls] = max(scales[cls], abs(numeric))
    report = {cls: diffs[cls] / max(scales[cls], 1e-12) for cls in sorted(diffs)}
    if details:
        return report, dict(scales)
    return report


def format_report(report: dict, tol: float = TOLERANCE) -> str:
    lines = [f"{'class':<14}{'max rel err':>14}  status"]
    for cls, err in report.items():
        lines.append(f"{cls:<14}{err:>14.3e}  {'ok' if err <= tol else 'FAIL'}")
    return "\n".join(lines)
