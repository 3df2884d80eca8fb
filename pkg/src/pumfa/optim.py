"""Adam optimizer over named parameter tensors."""

import numpy as np


class AdamState:
    """Per-parameter first/second moment buffers plus a shared step counter."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8, lr=1e-4):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.lr = lr
        self.step_count = 0
        self.m = {}
        self.v = {}


class Adam:
    def __init__(self, named_params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        """``named_params``: iterable of (name, Tensor) leaves to optimize."""
        self.params = list(named_params)
        names = [n for n, _ in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.state = AdamState(beta1, beta2, eps, lr)
        for name, p in self.params:
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()

    def step(self):
        """One bias-corrected Adam update; parameters with no grad are skipped."""
        s = self.state
        s.step_count += 1
        b1c = 1.0 - s.beta1**s.step_count
        b2c = 1.0 - s.beta2**s.step_count
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{name} of shape {p.data.shape}"
                )
            m = s.m[name]
            v = s.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * np.square(g)
            m_hat = m / b1c
            v_hat = v / b2c
            p.data -= s.lr * m_hat / (np.sqrt(v_hat) + s.eps)

    # -- checkpoint support -------------------------------------------------

    def state_arrays(self):
        """Moment buffers and step counter as flat named float arrays."""
        out = {"adam.step": np.array([self.state.step_count], dtype=np.float32)}
        for name, _ in self.params:
            out[f"adam.m.{name}"] = self.state.m[name]
            out[f"adam.v.{name}"] = self.state.v[name]
        return out

    def load_state_arrays(self, arrays):
        self.state.step_count = int(arrays["adam.step"][0])
        for name, p in self.params:
            m = arrays[f"adam.m.{name}"].reshape(p.data.shape)
            v = arrays[f"adam.v.{name}"].reshape(p.data.shape)
            self.state.m[name] = m.astype(p.data.dtype)
            self.state.v[name] = v.astype(p.data.dtype)
