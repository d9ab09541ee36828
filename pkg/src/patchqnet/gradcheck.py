"""Finite-difference validation of every analytic gradient path.

Each check compares an analytic gradient against central finite
differences of the corresponding forward computation on randomized
parameters and synthetic inputs, reporting the worst relative error
over all trials.  Used by the `gradcheck` CLI command as a fast
self-test of a build.
"""

from dataclasses import dataclass

import numpy as np

from . import classifier as cl
from . import reducer as rd
from . import statevec as sv
from .train import Model, TrainConfig, compute_gradients, cross_entropy

MODULE_RTOL = 1e-4
END_TO_END_RTOL = 1e-3
_FD_EPS = 1e-5
# denominator floor: entries below it are checked absolutely at
# floor * rtol, which must stay above central-difference roundoff (~1e-10)
_FLOOR = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    rtol: float

    @property
    def passed(self):
        return self.max_rel_err < self.rtol


def _rel(got, want):
    got, want = np.asarray(got, float), np.asarray(want, float)
    return float(np.max(np.abs(got - want) / np.maximum(np.abs(want), _FLOOR)))


def _fd(f, x, eps=_FD_EPS):
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(len(x)):
        d = np.zeros_like(x)
        d[i] = eps
        cols.append((np.asarray(f(x + d)) - np.asarray(f(x - d))) / (2 * eps))
    return np.stack(cols, axis=-1)


def _random_patch_image(rng):
    return rng.random((32, 32))


def check_statevec_params(rng, trials):
    """Adjoint parameter gradients of the built circuits vs FD."""
    worst = 0.0
    circuits = [rd.build_reducer_circuit(4), rd.build_naive_pool_reducer(4),
                cl.build_classifier_circuit()]
    for circ, params in circuits:
        dim = 1 << circ.n_qubits
        for _ in range(trials):
            params.randomize(rng)
            raw = rng.random(min(dim, 64))
            psi0, _ = sv.encode_rows(raw[None], n_qubits=circ.n_qubits)
            _, grads, _ = sv.adjoint_gradients(circ, params, psi0)

            def expectations(theta):
                trial = params.copy()
                trial.set_vector(theta)
                psi = sv.run_batch(circ, trial, psi0)
                return sv.expectations_batch(psi, circ.kept_qubits)[0]

            fd = _fd(expectations, params.vector())
            worst = max(worst, _rel(grads[0], fd))
    return CheckResult("statevec-params", worst, MODULE_RTOL)


def check_statevec_inputs(rng, trials):
    """Input Jacobian (through L2 normalization) vs FD."""
    circ, params = rd.build_reducer_circuit(4)
    worst = 0.0
    for _ in range(trials):
        params.randomize(rng)
        raw = rng.random(16) + 0.05
        jac = sv.grad_expectation_inputs(circ, params, raw)

        def expectations(v):
            psi0, _ = sv.encode_rows(v[None])
            psi = sv.run_batch(circ, params, psi0)
            return sv.expectations_batch(psi, circ.kept_qubits)[0]

        fd = _fd(expectations, raw)
        worst = max(worst, _rel(jac, fd))
    return CheckResult("statevec-inputs", worst, MODULE_RTOL)


def check_reducer_pipeline(rng, trials):
    """d Gamma / d theta_r of the fused features vs FD."""
    circ, params = rd.build_reducer_circuit(4)
    worst = 0.0
    for _ in range(trials):
        params.randomize(rng)
        img = _random_patch_image(rng)
        feats, dq = rd.reduce_image_with_grads(img, circ, params)
        dgamma = (feats.mask_part[:, :, None] * dq).reshape(64, -1)

        def gammas(theta):
            trial = params.copy()
            trial.set_vector(theta)
            return rd.reduce_image(img, circ, trial).gamma.ravel()

        fd = _fd(gammas, params.vector())
        worst = max(worst, _rel(dgamma, fd))
    return CheckResult("reducer-pipeline", worst, MODULE_RTOL)


def check_classifier_pipeline(rng, trials):
    """Quantum head parameter and input gradients vs FD."""
    circ, params = cl.build_classifier_circuit()
    worst = 0.0
    for _ in range(trials):
        params.randomize(rng)
        gamma = rng.normal(size=(8, 8)) * 0.1
        _, dtheta, dgamma = cl.classify_grads(gamma, circ, params)

        def expectations(theta):
            trial = params.copy()
            trial.set_vector(theta)
            e, _ = cl.classify_batch(gamma, circ, trial)
            return e[0]

        def expectations_of_input(flat):
            e, _ = cl.classify_batch(flat.reshape(8, 8), circ, params)
            return e[0]

        worst = max(worst, _rel(dtheta, _fd(expectations, params.vector())))
        worst = max(worst, _rel(dgamma, _fd(expectations_of_input, gamma.ravel(), 1e-6)))
    return CheckResult("classifier-pipeline", worst, MODULE_RTOL)


def check_fcc(rng, trials):
    """Dense-net backprop vs FD."""
    worst = 0.0
    for _ in range(trials):
        fcc = cl.FccParams.initialized(rng)
        # the shipped init zeroes the readout, which would zero most of
        # the gradient; check at a generic point instead
        fcc.set_vector(fcc.vector() + 0.3 * rng.standard_normal(fcc.count()))
        x = rng.normal(size=(2, 64)) * 0.1
        y = np.zeros((2, 2))
        y[np.arange(2), rng.integers(0, 2, 2)] = 1.0
        _, probs, cache = cl.fcc_forward_batch(x, fcc)
        grad, _ = cl.fcc_backward(fcc, cache, probs - y)

        def loss_of(vec):
            trial = cl.FccParams()
            trial.set_vector(vec)
            _, p, _ = cl.fcc_forward_batch(x, trial)
            return cross_entropy(p, y)

        fd2 = _fd(loss_of, fcc.vector(), 1e-6)
        worst = max(worst, _rel(grad, fd2))
    return CheckResult("fcc", worst, MODULE_RTOL)


def check_end_to_end(rng, trials, classifier_kind="quantum"):
    """Joint loss gradient over all trainable parameters vs FD."""
    worst = 0.0
    for _ in range(trials):
        cfg = TrainConfig(classifier_kind=classifier_kind,
                          seed=int(rng.integers(2 ** 31)))
        model = Model(cfg, rng)
        theta = model.vector()  # generic point, not the (partly zero) init
        model.set_vector(theta + 0.3 * rng.standard_normal(theta.size))
        images = np.stack([_random_patch_image(rng) for _ in range(2)])
        onehot = np.zeros((2, 2))
        onehot[np.arange(2), rng.integers(0, 2, 2)] = 1.0
        _, g_r, g_c = compute_gradients(model, images, onehot)
        grad = np.concatenate([g_r, g_c])

        def loss_of(theta):
            model.set_vector(theta)
            _, probs = model.predict_batch(images)
            return cross_entropy(probs, onehot)

        theta0 = model.vector()
        fd = _fd(loss_of, theta0, 1e-4)
        model.set_vector(theta0)
        worst = max(worst, _rel(grad, fd))
    return CheckResult(f"end-to-end-{classifier_kind}", worst, END_TO_END_RTOL)


def run_checks(trials=20, seed=0):
    """Run every gradient suite; returns a list of CheckResult."""
    rng = np.random.default_rng(seed)
    return [
        check_statevec_params(rng, max(1, trials // 3)),
        check_statevec_inputs(rng, trials),
        check_reducer_pipeline(rng, max(1, trials // 4)),
        check_classifier_pipeline(rng, max(1, trials // 4)),
        check_fcc(rng, trials),
        check_end_to_end(rng, max(1, trials // 10), "quantum"),
        check_end_to_end(rng, max(1, trials // 10), "fcc"),
    ]
