import gin
import torch

"""
Adam optimizer over layers.Parameter objects, used in "trainer.py"
"""


@gin.configurable
class Adam:
    """Adam with coupled L2 weight decay (added to the gradient)

    State is keyed by parameter name so it can be saved and reloaded
    next to a checkpoint ("weights.py").
    """

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {}
        self.v = {}

    def step(self, params):
        """One update of every given trainable Parameter, in place"""
        self.step_count += 1
        bias1 = 1 - self.beta1 ** self.step_count
        bias2 = 1 - self.beta2 ** self.step_count
        with torch.no_grad():
            for param in params:
                if not param.trainable:
                    continue
                grad = param.grad + self.weight_decay * param.value
                m = self.m.setdefault(param.name, torch.zeros_like(param.value))
                v = self.v.setdefault(param.name, torch.zeros_like(param.value))
                m.mul_(self.beta1).add_((1 - self.beta1) * grad)
                v.mul_(self.beta2).add_((1 - self.beta2) * grad * grad)
                param.value -= self.lr * (m / bias1) / (torch.sqrt(v / bias2) + self.eps)

    def state_tensors(self):
        """{name: tensor} snapshot of the moments and step count"""
        tensors = {"step_count": torch.tensor([float(self.step_count)])}
        for name in self.m:
            tensors[f"m.{name}"] = self.m[name]
            tensors[f"v.{name}"] = self.v[name]
        return tensors

    def load_state_tensors(self, tensors):
        """restores a snapshot made by state_tensors()"""
        self.step_count = int(tensors["step_count"].reshape(-1)[0])
        self.m, self.v = {}, {}
        for key, tensor in tensors.items():
            if key.startswith("m."):
                self.m[key[2:]] = tensor.clone()
            elif key.startswith("v."):
                self.v[key[2:]] = tensor.clone()
