import numpy as np


class Optimizer:
    kind = ""

    def __init__(self, lr):
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        raise NotImplementedError

    def state(self):
        return {"kind": self.kind, "lr": self.lr, "t": self.t}

    def load_state(self, state):
        self.t = state.get("t", 0)


class SGD(Optimizer):
    kind = "SGD"

    def __init__(self, lr=0.01):
        super().__init__(lr)

    def step(self, params, grads):
        self.t += 1
        for k in params:
            params[k] -= self.lr * grads[k]


class RMSprop(Optimizer):
    """Decaying average of squared gradients scales each parameter's step."""

    kind = "RMSprop"

    def __init__(self, lr=0.001, rho=0.9, eps=1e-8):
        super().__init__(lr)
        self.rho = rho
        self.eps = eps
        self.v = None

    def step(self, params, grads):
        if self.v is None:
            self.v = {k: np.zeros_like(w) for k, w in params.items()}
        self.t += 1
        for k in params:
            g = grads[k]
            self.v[k] = self.rho * self.v[k] + (1 - self.rho) * g * g
            params[k] -= self.lr * g / (np.sqrt(self.v[k]) + self.eps)

    def state(self):
        return {**super().state(), "rho": self.rho, "eps": self.eps, "v": self.v}

    def load_state(self, state):
        super().load_state(state)
        self.v = state.get("v")


class Adam(Optimizer):
    kind = "Adam"

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = {k: np.zeros_like(w) for k, w in params.items()}
            self.v = {k: np.zeros_like(w) for k, w in params.items()}
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in params:
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self):
        return {**super().state(), "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "m": self.m, "v": self.v}

    def load_state(self, state):
        super().load_state(state)
        self.m, self.v = state.get("m"), state.get("v")


OPTIMIZERS = {"SGD": SGD, "Adam": Adam, "RMSprop": RMSprop}


def make_optimizer(kind, lr=None):
    cls = OPTIMIZERS[kind]
    return cls() if lr is None else cls(lr=lr)
