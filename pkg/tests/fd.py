"""Central finite-difference gradient oracle used by the loss tests."""

import torch


def finite_diff_grad(fn, x: torch.Tensor, h: float = 1e-5) -> torch.Tensor:
    """Central differences of a scalar function w.r.t. every entry of x."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        hi = float(fn(x).detach())
        flat[i] = orig - h
        lo = float(fn(x).detach())
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def autograd_grad(fn, x: torch.Tensor) -> torch.Tensor:
    x = x.detach().clone().requires_grad_(True)
    fn(x).backward()
    return x.grad.detach().clone()


def assert_grad_matches(fn, x: torch.Tensor, rel_tol: float = 1e-3,
                        h: float = 1e-5) -> None:
    """Relative error between autograd and finite differences, measured
    against the gradient norm so near-zero entries do not explode."""
    ag = autograd_grad(fn, x)
    fd = finite_diff_grad(fn, x, h)
    scale = max(float(fd.norm()), float(ag.norm()), 1e-8)
    rel = float((ag - fd).norm()) / scale
    assert rel < rel_tol, f"gradient mismatch: rel err {rel:.3e}"
