"""Feed-forward classifiers trained by mini-batch SGD on noisy labels.

The network is a plain ReLU multilayer perceptron with a softmax head,
implemented directly on numpy so the loss adapters (plain cross entropy,
forward correction, importance reweighting) expose analytic gradients that
can be checked against finite differences.  Training keeps the weight
snapshot with the best noisy-label validation accuracy, which limits how
much label noise the selected model has memorized.

Everything is deterministic given the seed: weight init, epoch shuffles
and the optional internal split all draw from one Philox stream.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .core import (
    STREAM_SPLIT,
    STREAM_TRAIN,
    Dataset,
    DimensionMismatch,
    MissingNoisyLabels,
    NonFiniteLoss,
    TooFewSamples,
    philox_rng,
)

# Probabilities below this are clamped inside -log; clamped examples
# contribute zero gradient, consistent with the flat region of the clamp.
LOG_CLIP = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def plain_ce_loss(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy over a batch and its gradient w.r.t. logits.

    The clip only floors the reported loss; the gradient stays the exact
    softmax-CE gradient so confidently wrong examples keep their full
    corrective signal.
    """
    p = softmax(logits)
    b = labels.shape[0]
    idx = np.arange(b)
    py = p[idx, labels]
    loss = float(-np.log(np.maximum(py, LOG_CLIP)).mean())
    grad = p.copy()
    grad[idx, labels] -= 1.0
    return loss, grad / b


def split_train_val(data: Dataset, val_fraction: float, seed: int):
    """Split a dataset into disjoint (train, val) subsets uniformly at random.

    The split is unstratified; both parts are non-empty and their union is
    the input.  Deterministic given the seed.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    n = data.n_samples
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples to split, got {n}")
    rng = philox_rng(seed, STREAM_SPLIT)
    train_idx, val_idx = _split_indices(n, val_fraction, rng)
    return data.subset(train_idx), data.subset(val_idx)


def _split_indices(n: int, val_fraction: float, rng: np.random.Generator):
    n_val = int(round(n * val_fraction))
    n_val = min(max(n_val, 1), n - 1)
    perm = rng.permutation(n)
    return perm[n_val:], perm[:n_val]


def _init_layers(layer_sizes, rng, scale=1.0, output_scale=3.0):
    """Gaussian weight init, zero biases, with a larger output-layer scale.

    The wide output layer makes the initial logits saturated; SGD then
    re-fits the data-dense region quickly while predictions at sparse
    extreme points stay near one-hot.  That reproduces, at this network
    size, the overconfident-at-the-argmax behavior that larger networks
    trained on noisy labels exhibit and that anchor-point estimation
    keys on.  Smaller scales yield smoother, under-saturated posteriors.
    """
    coefs, intercepts = [], []
    last = len(layer_sizes) - 2
    for li, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        s = output_scale if li == last else scale
        coefs.append(rng.standard_normal((fan_in, fan_out)) * s)
        intercepts.append(np.zeros(fan_out))
    return coefs, intercepts


def _forward(X, coefs, intercepts):
    acts = [X]
    for W, b in zip(coefs[:-1], intercepts[:-1]):
        acts.append(np.maximum(acts[-1] @ W + b, 0.0))
    logits = acts[-1] @ coefs[-1] + intercepts[-1]
    return acts, logits


def loss_and_gradients(coefs, intercepts, X, y, loss_fn):
    """Mean loss of a batch plus gradients for every weight and bias.

    ``loss_fn(logits, labels) -> (loss, dloss_dlogits)`` is any of the loss
    adapters in this package.  The backward pass is standard backprop with
    the ReLU subgradient taken as zero at the kink.
    """
    acts, logits = _forward(X, coefs, intercepts)
    loss, delta = loss_fn(logits, y)
    grad_coefs = [None] * len(coefs)
    grad_intercepts = [None] * len(coefs)
    for li in reversed(range(len(coefs))):
        grad_coefs[li] = acts[li].T @ delta
        grad_intercepts[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ coefs[li].T) * (acts[li] > 0)
    return loss, grad_coefs, grad_intercepts


class FeedForwardClassifier(BaseEstimator, ClassifierMixin):
    """ReLU MLP trained with SGD on noisy labels, best-validation selected.

    Parameters
    ----------
    hidden_sizes : sequence of int
        Hidden layer widths.
    num_classes : int
        Number of label classes C.
    loss : {"plain_ce", "forward", "reweight"} or callable
        Loss adapter; "forward" and "reweight" need ``transition``.
        A callable must map ``(logits, labels) -> (loss, grad)``.
    transition : TransitionMatrix, optional
        Matrix payload for the corrected losses.
    epochs, lr_initial, lr_decay_factor, lr_decay_epoch, batch_size : SGD
        schedule; the learning rate drops by ``lr_decay_factor`` after
        epoch ``lr_decay_epoch``.
    init_scale, init_output_scale : float
        Standard deviations of the Gaussian weight init for hidden and
        output layers; see :func:`_init_layers` for why the output layer
        starts larger.
    seed : int
        Seeds init, shuffling and the internal split.
    val_fraction : float
        Used only when ``fit`` is not given an explicit validation set.

    Attributes (after fit)
    ----------------------
    coefs_, intercepts_ : per-layer weights of the best checkpoint.
    best_val_accuracy_, best_epoch_ : the selected checkpoint's stats.
    """

    def __init__(
        self,
        hidden_sizes=(25, 25),
        num_classes=2,
        loss="plain_ce",
        transition=None,
        epochs=100,
        lr_initial=0.01,
        lr_decay_factor=10.0,
        lr_decay_epoch=50,
        batch_size=128,
        init_scale=1.0,
        init_output_scale=3.0,
        seed=0,
        val_fraction=0.2,
    ):
        self.hidden_sizes = hidden_sizes
        self.num_classes = num_classes
        self.loss = loss
        self.transition = transition
        self.epochs = epochs
        self.lr_initial = lr_initial
        self.lr_decay_factor = lr_decay_factor
        self.lr_decay_epoch = lr_decay_epoch
        self.batch_size = batch_size
        self.init_scale = init_scale
        self.init_output_scale = init_output_scale
        self.seed = seed
        self.val_fraction = val_fraction

    def _resolve_loss(self):
        if callable(self.loss):
            return self.loss
        if self.loss == "plain_ce":
            return plain_ce_loss
        if self.loss in ("forward", "reweight"):
            from .corrections import ForwardLoss, ReweightLoss

            if self.transition is None:
                raise ValueError(f"loss={self.loss!r} requires a transition matrix")
            if self.transition.num_classes != self.num_classes:
                raise DimensionMismatch(
                    f"transition has {self.transition.num_classes} classes, "
                    f"classifier has {self.num_classes}"
                )
            adapter = ForwardLoss if self.loss == "forward" else ReweightLoss
            return adapter(self.transition)
        raise ValueError(f"unknown loss {self.loss!r}")

    def _check_config(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_decay_epoch > self.epochs:
            raise ValueError(
                f"lr_decay_epoch ({self.lr_decay_epoch}) must be <= epochs ({self.epochs})"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")

    def fit(self, X, y, X_val=None, y_val=None):
        """Train on (X, y); select the epoch with the best validation accuracy.

        When no validation set is passed, ``val_fraction`` of (X, y) is
        split off first.  Ties in validation accuracy keep the earliest
        epoch, so training is fully reproducible.
        """
        self._check_config()
        X = np.ascontiguousarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X {X.shape} and y {y.shape} do not align")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DimensionMismatch(f"labels must lie in [0, {self.num_classes})")
        if (X_val is None) != (y_val is None):
            raise ValueError("pass both X_val and y_val or neither")
        loss_fn = self._resolve_loss()
        rng = philox_rng(self.seed, STREAM_TRAIN)
        if X_val is None:
            tr, va = _split_indices(X.shape[0], self.val_fraction, rng)
            X, y, X_val, y_val = X[tr], y[tr], X[va], y[va]
        else:
            X_val = np.ascontiguousarray(X_val, dtype=float)
            y_val = np.asarray(y_val, dtype=np.int64)
        if X.shape[0] == 0 or X_val.shape[0] == 0:
            raise TooFewSamples("both the train and validation sets must be non-empty")
        if X_val.shape[1] != X.shape[1]:
            raise DimensionMismatch("train and validation feature widths differ")

        layer_sizes = [X.shape[1], *list(self.hidden_sizes), self.num_classes]
        coefs, intercepts = _init_layers(
            layer_sizes, rng, self.init_scale, self.init_output_scale
        )
        n = X.shape[0]
        best_acc, best_epoch, best = -1.0, 0, None
        for epoch in range(1, self.epochs + 1):
            lr = self.lr_initial
            if epoch > self.lr_decay_epoch:
                lr = self.lr_initial / self.lr_decay_factor
            perm = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = perm[start : start + self.batch_size]
                loss, gw, gb = loss_and_gradients(coefs, intercepts, X[idx], y[idx], loss_fn)
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"non-finite loss at epoch {epoch}")
                for li in range(len(coefs)):
                    coefs[li] -= lr * gw[li]
                    intercepts[li] -= lr * gb[li]
            _, logits = _forward(X_val, coefs, intercepts)
            val_acc = float((logits.argmax(axis=1) == y_val).mean())
            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best = ([w.copy() for w in coefs], [b.copy() for b in intercepts])

        self.coefs_, self.intercepts_ = best
        self.best_val_accuracy_ = best_acc
        self.best_epoch_ = best_epoch
        self.classes_ = np.arange(self.num_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_input(self, X):
        if not hasattr(self, "coefs_"):
            raise AttributeError("classifier is not fitted yet")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}"
            )
        return X

    def decision_function(self, X) -> np.ndarray:
        X = self._check_input(X)
        _, logits = _forward(X, self.coefs_, self.intercepts_)
        return logits

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def predict_posterior(model, x) -> np.ndarray:
    """Posterior for a single feature vector (or batch) from any model."""
    x = np.asarray(x, dtype=float)
    p = model.predict_proba(np.atleast_2d(x))
    return p[0] if x.ndim == 1 else p


def predict_label(model, x):
    """Argmax class for a single feature vector; ties go to the lowest index."""
    p = predict_posterior(model, x)
    if p.ndim == 1:
        return int(np.argmax(p))
    return np.argmax(p, axis=1)


def train_classifier(train: Dataset, val: Dataset, **params) -> FeedForwardClassifier:
    """Fit a :class:`FeedForwardClassifier` on the noisy labels of two datasets."""
    if train.noisy_labels is None or val.noisy_labels is None:
        raise MissingNoisyLabels("training operates on noisy labels; corrupt first")
    clf = FeedForwardClassifier(num_classes=train.num_classes, **params)
    return clf.fit(train.features, train.noisy_labels, val.features, val.noisy_labels)


def model_to_json_dict(clf: FeedForwardClassifier) -> dict:
    """Serialize a fitted classifier: hyperparameters plus flat weight arrays."""
    if not hasattr(clf, "coefs_"):
        raise ValueError("only fitted classifiers can be serialized")
    if callable(clf.loss):
        raise ValueError("callable loss adapters cannot be serialized")
    return {
        "hidden_sizes": [int(h) for h in clf.hidden_sizes],
        "num_classes": int(clf.num_classes),
        "loss": clf.loss,
        "transition": None if clf.transition is None else clf.transition.to_json_dict(),
        "epochs": int(clf.epochs),
        "lr_initial": clf.lr_initial,
        "lr_decay_factor": clf.lr_decay_factor,
        "lr_decay_epoch": int(clf.lr_decay_epoch),
        "batch_size": int(clf.batch_size),
        "init_scale": clf.init_scale,
        "init_output_scale": clf.init_output_scale,
        "seed": int(clf.seed),
        "val_fraction": clf.val_fraction,
        "n_features_in": int(clf.n_features_in_),
        "weights": [
            {"shape": list(w.shape), "data": w.ravel().tolist()} for w in clf.coefs_
        ],
        "biases": [b.tolist() for b in clf.intercepts_],
        "best_val_accuracy": clf.best_val_accuracy_,
        "best_epoch": int(clf.best_epoch_),
    }


def model_from_json_dict(obj: dict) -> FeedForwardClassifier:
    """Rebuild a fitted classifier from :func:`model_to_json_dict` output."""
    from .core import TransitionMatrix

    clf = FeedForwardClassifier(
        hidden_sizes=tuple(obj["hidden_sizes"]),
        num_classes=obj["num_classes"],
        loss=obj["loss"],
        transition=None
        if obj.get("transition") is None
        else TransitionMatrix.from_json_dict(obj["transition"]),
        epochs=obj["epochs"],
        lr_initial=obj["lr_initial"],
        lr_decay_factor=obj["lr_decay_factor"],
        lr_decay_epoch=obj["lr_decay_epoch"],
        batch_size=obj["batch_size"],
        init_scale=obj["init_scale"],
        init_output_scale=obj["init_output_scale"],
        seed=obj["seed"],
        val_fraction=obj["val_fraction"],
    )
    clf.coefs_ = [
        np.asarray(w["data"], dtype=float).reshape(w["shape"]) for w in obj["weights"]
    ]
    clf.intercepts_ = [np.asarray(b, dtype=float) for b in obj["biases"]]
    clf.best_val_accuracy_ = obj["best_val_accuracy"]
    clf.best_epoch_ = obj["best_epoch"]
    clf.classes_ = np.arange(obj["num_classes"])
    clf.n_features_in_ = obj["n_features_in"]
    return clf
