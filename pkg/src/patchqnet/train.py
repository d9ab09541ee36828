"""Joint optimization of reducer and classifier parameters.

One forward pass per batch computes fused features with their analytic
quantum gradients; the loss is summed softmax cross-entropy.  The chain
rule crosses the measurement/re-encoding boundary explicitly:

    d L / d theta_c   via the classifier's parameter Jacobian,
    d L / d Gamma     via the classifier's input Jacobian (through the
                      L2 normalization of the 64 raw features),
    d L / d theta_r = sum over patches of (dL/dGamma) * Y * d<Z>/d theta_r,

so nothing is ever finite-differenced through a nonlinear stage.
Updates use Nesterov momentum in lookahead-gradient form, with the
learning rate dropped permanently once evaluated test accuracy crosses
a threshold.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifier as cl
from . import reducer as rd
from .ansatz import SharingPolicy
from .data import batch_indices
from .errors import ConfigurationError, ContractError, NumericalError

LOG_CLAMP = 1e-12
CHECKPOINT_VERSION = 1

REDUCER_KINDS = ("proposed", "naive-pool")
CLASSIFIER_KINDS = ("quantum", "fcc")


@dataclass
class TrainConfig:
    classes: tuple = (0, 1)
    epochs: int = 5
    batch_size: int = 60
    lr_high: float = 0.01
    lr_low: float = 0.001
    lr_switch_acc: float = 0.90
    momentum: float = 0.9
    eval_every: int = 20
    seed: int = 0
    reducer_kind: str = "proposed"
    classifier_kind: str = "quantum"
    conv_shared: bool = True
    pool_shared: bool = True
    rotation_layer_shared: bool = False
    aux_rotations_trainable: bool = False
    eval_subset: int = 0  # images per evaluation; 0 = full test set

    def validate(self):
        if not (0 < self.lr_low <= self.lr_high):
            raise ConfigurationError(f"need 0 < lr_low <= lr_high, got "
                                     f"{self.lr_low}, {self.lr_high}")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.epochs < 1 or self.eval_every < 1:
            raise ConfigurationError("epochs and eval_every must be >= 1")
        if self.reducer_kind not in REDUCER_KINDS:
            raise ConfigurationError(f"unknown reducer kind {self.reducer_kind!r}")
        if self.classifier_kind not in CLASSIFIER_KINDS:
            raise ConfigurationError(f"unknown classifier kind {self.classifier_kind!r}")
        if len(self.classes) != 2:
            raise ConfigurationError(f"need a class pair, got {self.classes}")
        return self

    def policy(self):
        return SharingPolicy(self.conv_shared, self.pool_shared,
                             self.rotation_layer_shared, self.aux_rotations_trainable)

    def to_dict(self):
        d = asdict(self)
        d["classes"] = list(self.classes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["classes"] = tuple(d.get("classes", (0, 1)))
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        return cls(**d).validate()


@dataclass
class OptimizerState:
    velocity: np.ndarray
    learning_rate: float
    iteration: int = 0
    best_accuracy: float = -1.0


@dataclass
class TrainingRecord:
    iteration: int
    epoch: int
    train_loss: float
    test_accuracy: float
    learning_rate: float
    wall_seconds: float


@dataclass
class TrainResult:
    model: "Model"
    records: list
    batch_losses: list
    best_accuracy: float
    final_accuracy: float
    wall_seconds: float


class Model:
    """Reducer circuit + classification head with one flat parameter view."""

    def __init__(self, config, rng=None):
        config.validate()
        self.config = config
        policy = config.policy()
        build = (rd.build_reducer_circuit if config.reducer_kind == "proposed"
                 else rd.build_naive_pool_reducer)
        self.reducer_circuit, self.reducer_params = build(rd.PATCH_SIDE, policy)
        if config.classifier_kind == "quantum":
            self.classifier_circuit, self.classifier_params = \
                cl.build_classifier_circuit(policy=policy)
            self.fcc = None
        else:
            self.classifier_circuit = None
            self.classifier_params = None
            self.fcc = cl.FccParams()
        if rng is not None:
            self.reducer_params.randomize(rng)
            if self.fcc is None:
                self.classifier_params.randomize(rng)
            else:
                self.fcc = cl.FccParams.initialized(rng)

    def param_counts(self):
        n_r = self.reducer_params.total_trainable()
        n_c = (self.fcc.count() if self.fcc is not None
               else self.classifier_params.total_trainable())
        return n_r, n_c, n_r + n_c

    def vector(self):
        head = self.fcc.vector() if self.fcc is not None else self.classifier_params.vector()
        return np.concatenate([self.reducer_params.vector(), head])

    def set_vector(self, vec):
        n_r, n_c, total = self.param_counts()
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (total,):
            raise ContractError(f"expected {total} parameters, got {vec.shape}")
        self.reducer_params.set_vector(vec[:n_r])
        if self.fcc is not None:
            self.fcc.set_vector(vec[n_r:])
        else:
            self.classifier_params.set_vector(vec[n_r:])

    def reduce_batch(self, images):
        """(B, 32, 32) -> (gammas (B, 8, 8), masks (B, 8, 8))."""
        feats = rd.reduce_images(images, self.reducer_circuit, self.reducer_params)
        return (np.stack([f.gamma for f in feats]),
                np.stack([f.mask_part for f in feats]))

    def head_forward(self, gammas):
        """(B, 8, 8) fused features -> (scores, probabilities)."""
        if self.fcc is not None:
            logits, probs, _ = cl.fcc_forward_batch(gammas, self.fcc)
            return logits, probs
        return cl.classify_batch(gammas, self.classifier_circuit, self.classifier_params)

    def predict_batch(self, images):
        gammas, _ = self.reduce_batch(images)
        return self.head_forward(gammas)

    def forward_one(self, image):
        """Single-sample pipeline; returns (ClassifierOutput, features)."""
        feats = rd.reduce_image(np.asarray(image, dtype=np.float64),
                                self.reducer_circuit, self.reducer_params)
        scores, probs = self.head_forward(feats.gamma[None])
        return cl.ClassifierOutput(scores[0], probs[0]), feats


def cross_entropy(probabilities, onehot):
    """Summed cross-entropy with the log clamped at 1e-12."""
    p = np.clip(np.asarray(probabilities, dtype=np.float64), LOG_CLAMP, 1.0)
    return float(-np.sum(np.asarray(onehot) * np.log(p)))


def compute_gradients(model, images, onehot):
    """Summed batch loss and its exact gradient at the current parameters.

    Returns (loss, grad_reducer, grad_head).
    """
    if len(images) == 0:
        raise ContractError("empty batch")
    feats, dq = rd.reduce_images_with_grads(
        np.asarray(images, dtype=np.float64),
        model.reducer_circuit, model.reducer_params)
    gammas = np.stack([f.gamma for f in feats])
    masks = np.stack([f.mask_part for f in feats])
    b = len(gammas)

    if model.fcc is not None:
        _, probs, cache = cl.fcc_forward_batch(gammas, model.fcc)
        dscores = probs - onehot
        grad_head, dldg = cl.fcc_backward(model.fcc, cache, dscores)
    else:
        _, probs, dtheta, dgamma = cl.classify_batch_grads(
            gammas, model.classifier_circuit, model.classifier_params)
        dscores = probs - onehot
        grad_head = np.einsum("bk,bks->s", dscores, dtheta)
        dldg = np.einsum("bk,bkp->bp", dscores, dgamma)

    loss = cross_entropy(probs, onehot)
    n_slots = dq.shape[3]
    grad_reducer = np.einsum(
        "bp,bps->s",
        dldg * masks.reshape(b, -1),
        dq.reshape(b, -1, n_slots))

    if not (np.isfinite(loss) and np.all(np.isfinite(grad_reducer))
            and np.all(np.isfinite(grad_head))):
        raise NumericalError(
            f"non-finite loss or gradient (loss={loss}, "
            f"|grad_r|max={np.abs(grad_reducer).max(initial=0)}, "
            f"|grad_c|max={np.abs(grad_head).max(initial=0)})")
    return loss, grad_reducer, grad_head


def lookahead_point(theta, opt, momentum):
    return theta + momentum * opt.velocity


def nesterov_step(theta, grad, opt, momentum):
    """v <- mu v - eta grad(theta + mu v); theta <- theta + v."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if theta.shape != opt.velocity.shape or grad.shape != theta.shape:
        raise ContractError(
            f"shape mismatch: theta {theta.shape}, grad {grad.shape}, "
            f"velocity {opt.velocity.shape}")
    opt.velocity = momentum * opt.velocity - opt.learning_rate * grad
    return theta + opt.velocity


def evaluate(model, dataset, limit=0, chunk=250):
    """(accuracy, mean loss) over the dataset (or an evenly spaced subset)."""
    n = len(dataset)
    if n == 0:
        raise ConfigurationError("cannot evaluate on an empty dataset")
    if limit and limit < n:
        idx = np.unique(np.linspace(0, n - 1, limit).astype(int))
    else:
        idx = np.arange(n)
    hits = 0
    loss_sum = 0.0
    for at in range(0, len(idx), chunk):
        sel = idx[at:at + chunk]
        _, probs = model.predict_batch(dataset.images[sel])
        truth = np.argmax(dataset.onehot[sel], axis=1)
        hits += int(np.sum(np.argmax(probs, axis=1) == truth))
        loss_sum += cross_entropy(probs, dataset.onehot[sel])
    return hits / len(idx), loss_sum / len(idx)


METRICS_HEADER = "iteration,epoch,train_loss,test_accuracy,learning_rate,wall_seconds"


def _record_line(rec):
    return (f"{rec.iteration},{rec.epoch},{rec.train_loss!r},"
            f"{rec.test_accuracy!r},{rec.learning_rate!r},{rec.wall_seconds:.3f}")


def train_loop(config, train_ds, test_ds, metrics_path=None,
               checkpoint_best=None, checkpoint_last=None, log=None,
               clock=time.perf_counter):
    """Run the full optimization; returns a TrainResult.

    Writes one metrics row per evaluation; `train_loss` is the summed
    loss of the batch consumed at that iteration (measured at the
    lookahead point, where the gradient is taken).  Checkpoints go to
    `checkpoint_best` on accuracy improvement and `checkpoint_last` at
    every evaluation.  `clock` is injectable so the wall-time column can
    be made reproducible under test.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    model = Model(config, rng)
    theta = model.vector()
    opt = OptimizerState(np.zeros_like(theta), config.lr_high)

    iters_per_epoch = math.ceil(len(train_ds) / config.batch_size)
    total_iters = config.epochs * iters_per_epoch
    records = []
    batch_losses = []
    metrics_file = open(metrics_path, "w") if metrics_path else None
    if metrics_file:
        echo = json.dumps(config.to_dict(), sort_keys=True)
        metrics_file.write(f"# config {echo}\n{METRICS_HEADER}\n")

    started = clock()
    accuracy = float("nan")
    try:
        iteration = 0
        for epoch in range(1, config.epochs + 1):
            for idx in batch_indices(len(train_ds), config.batch_size, rng):
                iteration += 1
                model.set_vector(lookahead_point(theta, opt, config.momentum))
                try:
                    loss, g_r, g_c = compute_gradients(
                        model, train_ds.images[idx], train_ds.onehot[idx])
                except NumericalError as exc:
                    raise NumericalError(
                        f"iteration {iteration} (epoch {epoch}): {exc}") from exc
                grad = np.concatenate([g_r, g_c])
                theta = nesterov_step(theta, grad, opt, config.momentum)
                model.set_vector(theta)
                opt.iteration = iteration
                batch_losses.append(loss)

                if iteration % config.eval_every == 0 or iteration == total_iters:
                    accuracy, _ = evaluate(model, test_ds, limit=config.eval_subset)
                    if accuracy >= config.lr_switch_acc:
                        opt.learning_rate = config.lr_low
                    rec = TrainingRecord(iteration, epoch, loss, accuracy,
                                         opt.learning_rate,
                                         clock() - started)
                    records.append(rec)
                    if metrics_file:
                        metrics_file.write(_record_line(rec) + "\n")
                        metrics_file.flush()
                    if log:
                        log(f"iter {iteration:5d} epoch {epoch} "
                            f"loss {loss:8.3f} acc {accuracy:.4f} "
                            f"lr {opt.learning_rate}")
                    if accuracy > opt.best_accuracy:
                        opt.best_accuracy = accuracy
                        if checkpoint_best:
                            save_checkpoint(checkpoint_best, model, opt)
                    if checkpoint_last:
                        save_checkpoint(checkpoint_last, model, opt)
    finally:
        if metrics_file:
            metrics_file.close()

    return TrainResult(model, records, batch_losses, opt.best_accuracy,
                       accuracy, clock() - started)


# --- checkpoints --------------------------------------------------------

def _arrays_to_lists(arrays):
    return {k: np.asarray(v, dtype=np.float64).tolist() for k, v in arrays.items()}


def save_checkpoint(path, model, opt):
    """Structured-text (JSON) checkpoint; decimal arrays round-trip exactly."""
    groups, flags = model.reducer_params.dump()
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.config.seed,
        "iteration": opt.iteration,
        "reducer": {"groups": _arrays_to_lists(groups), "trainable": flags},
        "optimizer": {
            "velocity": opt.velocity.tolist(),
            "learning_rate": opt.learning_rate,
            "iteration": opt.iteration,
            "best_accuracy": opt.best_accuracy,
        },
    }
    if model.fcc is not None:
        doc["classifier"] = {"type": "fcc",
                             "arrays": _arrays_to_lists(model.fcc.dump())}
    else:
        cgroups, cflags = model.classifier_params.dump()
        doc["classifier"] = {"type": "quantum",
                             "groups": _arrays_to_lists(cgroups),
                             "trainable": cflags}
    text = json.dumps(doc, sort_keys=True, indent=1)
    with open(path, "w") as f:
        f.write(text + "\n")


def load_checkpoint(path):
    """Rebuild (model, optimizer state) from a checkpoint file."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"unreadable checkpoint {path}: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint version {doc.get('format_version')}")
    config = TrainConfig.from_dict(doc["config"])
    model = Model(config)
    for name, vals in doc["reducer"]["groups"].items():
        model.reducer_params.set_group_values(name, vals)
    head = doc["classifier"]
    if head["type"] == "fcc":
        if model.fcc is None:
            raise ConfigurationError("checkpoint head is fcc but config says quantum")
        model.fcc = cl.FccParams.restore(
            {k: np.asarray(v) for k, v in head["arrays"].items()})
    else:
        if model.classifier_params is None:
            raise ConfigurationError("checkpoint head is quantum but config says fcc")
        for name, vals in head["groups"].items():
            model.classifier_params.set_group_values(name, vals)
    saved = doc["optimizer"]
    opt = OptimizerState(np.asarray(saved["velocity"], dtype=np.float64),
                         float(saved["learning_rate"]),
                         int(saved["iteration"]),
                         float(saved["best_accuracy"]))
    if opt.velocity.shape != model.vector().shape:
        raise ConfigurationError("checkpoint optimizer state does not match model size")
    return model, opt
