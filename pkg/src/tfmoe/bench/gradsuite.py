"""The gradient-oracle suite behind the ``gradcheck`` CLI command.

Runs every differentiable kernel plus the composed predictor and
reconstructor losses against central finite differences on several random
shapes, and reports one line per check.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import GradCheckReport, Tensor, finite_difference_check, ops
from ..autodiff import ParamStore
from ..experts import PredictorExpert, VaeExpert, predictor_forward, vae_elbo
from ..seeding import rng_for


def _p(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _check(name, loss_fn, params, h, tol, results):
    results.append((name, finite_difference_check(loss_fn, params, h=h, tol=tol)))


def run_kernel_suite(h: float = 1e-5, tol: float = 1e-4,
                     seeds=(0, 1, 2)) -> list[tuple[str, GradCheckReport]]:
    results: list[tuple[str, GradCheckReport]] = []
    for seed in seeds:
        rng = np.random.default_rng(seed)

        w, b = _p(rng, 4, 3), _p(rng, 3)
        x = Tensor(rng.normal(size=(5, 4)))
        y = rng.normal(size=(5, 3))
        _check(f"linear[{seed}]",
               lambda w=w, b=b, x=x, y=y: ops.mse(ops.apply_linear(x, w, b), y),
               {"w": w, "b": b}, h, tol, results)

        xc = _p(rng, 2, 2, 7)
        kern = _p(rng, 3, 2, 3)
        yc = rng.normal(size=(2, 3, 5))
        _check(f"conv1d[{seed}]",
               lambda xc=xc, kern=kern, yc=yc: ops.mse(ops.conv1d(xc, kern), yc),
               {"x": xc, "kernel": kern}, h, tol, results)

        adj_raw = _p(rng, 4, 4)
        xs = _p(rng, 4, 2)
        lam = _p(rng, 3, 2, 2, 2)
        yd = rng.normal(size=(4, 3))

        def diffusion_loss(adj_raw=adj_raw, xs=xs, lam=lam, yd=yd):
            adjacency = ops.softmax_rows(adj_raw)
            return ops.mse(ops.diffusion_convolution(adjacency, xs, lam), yd)

        _check(f"diffusion_convolution[{seed}]", diffusion_loss,
               {"adj_raw": adj_raw, "x": xs, "lam": lam}, h, tol, results)

        logits = _p(rng, 4, 4)
        ys = rng.normal(size=(4, 4))
        _check(f"softmax_rows[{seed}]",
               lambda logits=logits, ys=ys: ops.mse(ops.softmax_rows(logits), ys),
               {"logits": logits}, h, tol, results)

        mean, log_var = _p(rng, 4), _p(rng, 4)
        noise = rng.standard_normal(4)
        yr = rng.normal(size=4)
        _check(f"reparameterize[{seed}]",
               lambda mean=mean, log_var=log_var, noise=noise, yr=yr:
                   ops.mse(ops.reparameterize(mean, log_var, noise), yr),
               {"mean": mean, "log_var": log_var}, h, tol, results)

        qm, ql = _p(rng, 3, 2), _p(rng, 3, 2)
        pm, pl = _p(rng, 2), _p(rng, 2)
        _check(f"gaussian_kl[{seed}]",
               lambda qm=qm, ql=ql, pm=pm, pl=pl: ops.gaussian_kl(qm, ql, pm, pl),
               {"q_mean": qm, "q_log_var": ql, "p_mean": pm, "p_log_var": pl},
               h, tol, results)

        a, bb = _p(rng, 3, 4), _p(rng, 3, 4)
        bb.data += np.where(a.data - bb.data >= 0, 1.0, -1.0)
        _check(f"mae[{seed}]", lambda a=a, bb=bb: ops.mae(a, bb), {"a": a, "b": bb},
               h, tol, results)

        e = _p(rng, 3, 2)
        wp, bp = _p(rng, 4, 1), _p(rng, 1)
        yp = rng.normal(size=(3, 3, 1))
        _check(f"pairwise_concat[{seed}]",
               lambda e=e, wp=wp, bp=bp, yp=yp:
                   ops.mse(ops.apply_linear(ops.pairwise_concat(e), wp, bp), yp),
               {"e": e, "w": wp, "b": bp}, h, tol, results)

    # composed stacks
    store = ParamStore()
    pred = PredictorExpert(store, 0, t_in=4, t_out=4, rng=rng_for(0, "suite"),
                           d_embed=3, channels=2, m_steps=2)
    pred.conv1_b.data[:] = 0.11
    pred.conv2_b.data[:] = 0.07
    rng = np.random.default_rng(7)
    xp = Tensor(rng.normal(size=(3, 4)))
    yp = rng.normal(size=(3, 4))
    gumbel = rng.gumbel(size=(3, 3))

    def predictor_loss():
        e = ops.apply_linear(xp, pred.embed_w, pred.embed_b)
        scores = ops.apply_linear(ops.pairwise_concat(e), pred.pair_w, pred.pair_b)
        adjacency = ops.softmax_rows(ops.add(ops.reshape(scores, (3, 3)), gumbel))
        return ops.mae(predictor_forward(pred, adjacency, xp), yp)

    _check("predictor_stack", predictor_loss, dict(store.items()), h, tol, results)

    store2 = ParamStore()
    recon = VaeExpert(store2, 0, width=5, d_z=2, rng=rng_for(1, "suite"), hidden=(6, 4))
    # keep hidden pre-activations away from the exact ReLU kink
    for name, tensor in store2.items():
        if name.endswith("bias"):
            tensor.data += 0.08
    xv = rng.normal(size=(3, 5))
    nv = rng.standard_normal((3, 2))
    _check("reconstructor_elbo",
           lambda: ops.neg(vae_elbo(recon, xv, nv)), dict(store2.items()),
           h, tol, results)
    return results
