import numpy as np


class SGD:
    def __init__(self, learning_rate):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for name, value in params.items():
            value -= value.dtype.type(self.learning_rate) * grads[name]


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)"""

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        correction1 = 1 - self.beta1 ** self.t
        correction2 = 1 - self.beta2 ** self.t
        for name, value in params.items():
            grad = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            value -= (self.learning_rate * update).astype(value.dtype)


OPTIMIZERS = {'adam': Adam, 'sgd': SGD}


def make_optimizer(name, learning_rate):
    return OPTIMIZERS[name.lower()](learning_rate)
