"""Feed-forward network with ReLU hidden layers and a softmax output, trained with torch."""
import logging

import numpy as np
import torch
from torch import nn

from .classifiers import Classifier, register_classifier
from .errors import InvalidParameter

logger = logging.getLogger(__name__)


def build_network(n_inputs: int, hidden_sizes, n_outputs: int, generator: torch.Generator, dtype=torch.float32) -> nn.Sequential:
    """
    Fully connected ReLU network producing logits.

    Hidden layers use He-uniform weights, the output layer Glorot-uniform;
    biases start at zero. All draws come from ``generator``.
    """
    sizes = [n_inputs, *hidden_sizes, n_outputs]
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        linear = nn.Linear(fan_in, fan_out, dtype=dtype)
        is_output = i == len(sizes) - 2
        bound = np.sqrt(6.0 / (fan_in + fan_out)) if is_output else np.sqrt(6.0 / fan_in)
        with torch.no_grad():
            linear.weight.uniform_(-bound, bound, generator=generator)
            linear.bias.zero_()
        layers.append(linear)
        if not is_output:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


@register_classifier
class MultiLayerPerceptron(Classifier):
    """
    Cross-entropy trained MLP. A seeded 10% of the training rows is held out
    for early stopping once the validation loss has not improved for
    ``patience`` epochs; the best weights are restored at the end.
    """

    name = "mlp"
    defaults = {
        "hidden_sizes": (64, 32),
        "learning_rate": 1e-3,
        "epochs": 200,
        "batch_size": 128,
        "optimizer": "adam",
        "validation_fraction": 0.1,
        "patience": 10,
        "seed": 0,
    }

    def _fit(self, X, y):
        p = self.params
        if p["optimizer"] not in ("adam", "sgd"):
            raise InvalidParameter(f"optimizer must be 'adam' or 'sgd', got {p['optimizer']!r}")
        hidden = tuple(int(h) for h in p["hidden_sizes"])
        if any(h < 1 for h in hidden) or int(p["epochs"]) < 1 or int(p["batch_size"]) < 1:
            raise InvalidParameter("hidden_sizes, epochs and batch_size must be positive")

        generator = torch.Generator().manual_seed(int(p["seed"]))
        self.network_ = build_network(X.shape[1], hidden, self.n_classes, generator)

        n = X.shape[0]
        order = torch.randperm(n, generator=generator).numpy()
        n_val = int(round(p["validation_fraction"] * n)) if p["patience"] else 0
        # too little data to hold anything out
        if n_val < 1 or n - n_val < self.n_classes:
            n_val = 0
        val_rows, train_rows = order[:n_val], order[n_val:]
        X_train = torch.as_tensor(X[train_rows], dtype=torch.float32)
        y_train = torch.as_tensor(y[train_rows], dtype=torch.long)
        X_val = torch.as_tensor(X[val_rows], dtype=torch.float32)
        y_val = torch.as_tensor(y[val_rows], dtype=torch.long)

        if p["optimizer"] == "adam":
            optimizer = torch.optim.Adam(self.network_.parameters(), lr=p["learning_rate"])
        else:
            optimizer = torch.optim.SGD(self.network_.parameters(), lr=p["learning_rate"])
        loss_fn = nn.CrossEntropyLoss()
        batch_size = int(p["batch_size"])

        self.loss_history_ = []
        best_val, best_state, stale = np.inf, None, 0
        for epoch in range(int(p["epochs"])):
            self.network_.train()
            perm = torch.randperm(X_train.shape[0], generator=generator)
            total = 0.0
            for start in range(0, X_train.shape[0], batch_size):
                rows = perm[start : start + batch_size]
                optimizer.zero_grad()
                loss = loss_fn(self.network_(X_train[rows]), y_train[rows])
                loss.backward()
                optimizer.step()
                total += loss.item() * rows.numel()
            self.loss_history_.append(total / X_train.shape[0])

            if n_val:
                self.network_.eval()
                with torch.no_grad():
                    val_loss = loss_fn(self.network_(X_val), y_val).item()
                if val_loss < best_val:
                    best_val, stale = val_loss, 0
                    best_state = {k: v.clone() for k, v in self.network_.state_dict().items()}
                else:
                    stale += 1
                    if stale >= p["patience"]:
                        logger.debug("MLP early stop at epoch %d, validation loss %.5f", epoch + 1, best_val)
                        break
        if best_state is not None:
            self.network_.load_state_dict(best_state)
        self.network_.eval()

    def _predict_proba(self, X):
        with torch.no_grad():
            logits = self.network_(torch.as_tensor(X, dtype=torch.float32))
            return torch.softmax(logits.double(), dim=1).numpy()
