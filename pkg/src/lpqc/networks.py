"""Classical parameter generators and their reverse-mode gradients.

The central object is the mixture-of-experts generator: E expert MLPs map a
latent z to candidate circuit-angle vectors theta^(i)(z), a gating MLP
produces softmax weights pi(z), and the generated angles are the convex
combination theta(z) = sum_i pi_i(z) theta^(i)(z). With E=1 the gating is
degenerate and the generator reduces to a single shared MLP.

Baselines live here too:

* no-latent: theta = mu + exp(log_std) * eps, a trainable diagonal Gaussian
  over angle space (reparameterized so gradients reach mu and log_std);
* random-deterministic (RD): frozen per-sample random angles for the first
  half of the layers, one shared trainable block for the rest;
* latent MLP (LMLP): the network emits a classical density-matrix
  parameterization directly, either A(z) with rho = A A^dag / tr(A A^dag)
  (ancilla-backed runs) or a normalized pure-state vector (no ancillas).

Everything is NumPy; backward passes are hand-rolled and batched. Weight
initialization is uniform Xavier (limit sqrt(6/(fan_in+fan_out))) with zero
biases, keeping tanh pre-activations in the linear regime at init.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .circuits import QubitLayout
from .priors import MIXTURE_COMPONENT_STD

_SQRT2 = np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _gelu(x: np.ndarray) -> np.ndarray:
    # Exact Gaussian-CDF form, not the tanh approximation.
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    return cdf + x * _INV_SQRT2PI * np.exp(-0.5 * x * x)


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64)),
    "gelu": (_gelu, _gelu_grad),
    "linear": (lambda x: x, lambda x: np.ones_like(x)),
}


@dataclass(frozen=True)
class MlpSpec:
    """MLP(d_in, D^(h), d_out): h hidden layers of width D, final affine."""

    d_in: int
    hidden_dim: int
    hidden_layers: int
    d_out: int
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if min(self.d_in, self.d_out) < 1 or self.hidden_layers < 0:
            raise ValueError("bad MLP dimensions")
        if self.hidden_layers > 0 and self.hidden_dim < 1:
            raise ValueError("bad MLP dimensions")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.d_in] + [self.hidden_dim] * self.hidden_layers + [self.d_out]
        return list(zip(dims[:-1], dims[1:]))


class Mlp:
    """Weights plus forward/backward for one MLP."""

    def __init__(self, spec: MlpSpec, weights: list[np.ndarray] | None = None):
        self.spec = spec
        if weights is None:
            weights = []
            for fan_in, fan_out in spec.layer_dims():
                weights.append(np.zeros((fan_out, fan_in)))
                weights.append(np.zeros(fan_out))
        self.weights = weights

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        weights = []
        for fan_in, fan_out in spec.layer_dims():
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            weights.append(np.zeros(fan_out))
        return cls(spec, weights)

    def parameters(self) -> list[np.ndarray]:
        return self.weights

    def forward(self, z: np.ndarray, cache: list | None = None) -> np.ndarray:
        """Batched forward; ``cache`` (if given) collects per-layer inputs and
        pre-activations for the backward pass."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.spec.d_in:
            raise ValueError(f"expected input dim {self.spec.d_in}, got {z.shape[1]}")
        act, _ = _ACTIVATIONS[self.spec.activation]
        n_layers = len(self.weights) // 2
        h = z
        for ell in range(n_layers):
            w, b = self.weights[2 * ell], self.weights[2 * ell + 1]
            pre = h @ w.T + b
            if cache is not None:
                cache.append((h, pre))
            h = pre if ell == n_layers - 1 else act(pre)  # last layer affine
        return h

    def backward(self, cache: list, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for (weights in declaration order, input z)."""
        _, dact = _ACTIVATIONS[self.spec.activation]
        n_layers = len(self.weights) // 2
        grads: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        g = grad_out
        for ell in reversed(range(n_layers)):
            h_in, pre = cache[ell]
            if ell != n_layers - 1:
                g = g * dact(pre)
            grads[2 * ell] = g.T @ h_in
            grads[2 * ell + 1] = g.sum(axis=0)
            g = g @ self.weights[2 * ell]
        return grads, g


def mlp_forward(mlp: Mlp, z: np.ndarray) -> np.ndarray:
    """Convenience wrapper returning a 1-D output for a 1-D input."""
    z = np.asarray(z, dtype=np.float64)
    out = mlp.forward(z)
    return out[0] if z.ndim == 1 else out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


GATING_HIDDEN_DIM = 32  # gating network is MLP(d, 32^(1), E) with tanh


class MoeGenerator:
    """E experts plus softmax gating; the trainable LPQC parameter map."""

    def __init__(self, layout: QubitLayout, experts: list[Mlp], gating: Mlp | None):
        if not experts:
            raise ValueError("need at least one expert")
        k = layout.n_params
        for ex in experts:
            if ex.spec.d_out != k:
                raise ValueError(f"expert output {ex.spec.d_out} != K = {k}")
        if len(experts) > 1:
            if gating is None:
                raise ValueError("multi-expert generator needs a gating network")
            if gating.spec.d_out != len(experts):
                raise ValueError("gating output must equal expert count")
        self.layout = layout
        self.experts = experts
        self.gating = gating if len(experts) > 1 else None

    @classmethod
    def init(
        cls,
        layout: QubitLayout,
        latent_dim: int,
        n_experts: int,
        hidden_dim: int,
        hidden_layers: int,
        rng: np.random.Generator,
        activation: str = "tanh",
        gating_hidden_dim: int = GATING_HIDDEN_DIM,
    ) -> "MoeGenerator":
        spec = MlpSpec(latent_dim, hidden_dim, hidden_layers, layout.n_params, activation)
        experts = [Mlp.init(spec, rng) for _ in range(n_experts)]
        gating = None
        if n_experts > 1:
            gating = Mlp.init(MlpSpec(latent_dim, gating_hidden_dim, 1, n_experts, "tanh"), rng)
        return cls(layout, experts, gating)

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def latent_dim(self) -> int:
        return self.experts[0].spec.d_in

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for ex in self.experts:
            params.extend(ex.parameters())
        if self.gating is not None:
            params.extend(self.gating.parameters())
        return params

    def gate_weights(self, z: np.ndarray) -> np.ndarray:
        """Softmax gating probabilities, shape (B, E); all ones for E=1."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if self.gating is None:
            return np.ones((z.shape[0], 1))
        return softmax(self.gating.forward(z))

    def forward(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
        """Returns (theta (B, K), pi (B, E), cache)."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        expert_caches: list[list] = []
        outs = []
        for ex in self.experts:
            c: list = []
            outs.append(ex.forward(z, cache=c))
            expert_caches.append(c)
        theta_i = np.stack(outs, axis=1)  # (B, E, K)
        if self.gating is None:
            pi = np.ones((z.shape[0], 1))
            gate_cache: list = []
        else:
            gate_cache = []
            pi = softmax(self.gating.forward(z, cache=gate_cache))
        theta = np.einsum("be,bek->bk", pi, theta_i)
        cache = {"expert_caches": expert_caches, "gate_cache": gate_cache,
                 "theta_i": theta_i, "pi": pi}
        return theta, pi, cache

    def backward(
        self, cache: dict, grad_theta: np.ndarray, grad_pi: np.ndarray | None = None
    ) -> list[np.ndarray]:
        """Gradients aligned with parameters().

        ``grad_theta`` is dL/dtheta (B, K); ``grad_pi`` collects direct
        contributions to dL/dpi (e.g. the entropy regularizer).
        """
        theta_i, pi = cache["theta_i"], cache["pi"]
        grads: list[np.ndarray] = []
        for i, ex in enumerate(self.experts):
            g_exp, _ = ex.backward(cache["expert_caches"][i], pi[:, i : i + 1] * grad_theta)
            grads.extend(g_exp)
        if self.gating is not None:
            dpi = np.einsum("bk,bek->be", grad_theta, theta_i)
            if grad_pi is not None:
                dpi = dpi + grad_pi
            # softmax Jacobian: dL/d eta_i = pi_i (dpi_i - sum_j pi_j dpi_j)
            dlogits = pi * (dpi - (dpi * pi).sum(axis=1, keepdims=True))
            g_gate, _ = self.gating.backward(cache["gate_cache"], dlogits)
            grads.extend(g_gate)
        return grads

    def spec_dict(self) -> dict:
        ex = self.experts[0].spec
        return {
            "family": "lpqc",
            "layout": [self.layout.n_data, self.layout.m_anc, self.layout.n_layers],
            "latent_dim": ex.d_in,
            "n_experts": self.n_experts,
            "hidden_dim": ex.hidden_dim,
            "hidden_layers": ex.hidden_layers,
            "activation": ex.activation,
            "gating_hidden_dim": self.gating.spec.hidden_dim if self.gating else GATING_HIDDEN_DIM,
        }


def moe_parameters(gen: MoeGenerator, z: np.ndarray) -> np.ndarray:
    """theta(z) = sum_i pi_i(z) theta^(i)(z); 1-D in, 1-D out."""
    z = np.asarray(z, dtype=np.float64)
    theta, _, _ = gen.forward(z)
    return theta[0] if z.ndim == 1 else theta


class NoLatentGenerator:
    """Trainable diagonal Gaussian over angle space, theta ~ N(mu, Sigma)."""

    def __init__(self, layout: QubitLayout, mu: np.ndarray | None = None,
                 log_std: np.ndarray | None = None):
        k = layout.n_params
        self.layout = layout
        self.mu = np.zeros(k) if mu is None else np.asarray(mu, dtype=np.float64)
        self.log_std = np.zeros(k) if log_std is None else np.asarray(log_std, dtype=np.float64)
        if self.mu.shape != (k,) or self.log_std.shape != (k,):
            raise ValueError(f"mu and log_std must have shape ({k},)")

    def parameters(self) -> list[np.ndarray]:
        return [self.mu, self.log_std]

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, dict]:
        """Reparameterized draws theta = mu + exp(log_std) * eps."""
        eps = rng.standard_normal((count, self.layout.n_params))
        theta = self.mu[None, :] + np.exp(self.log_std)[None, :] * eps
        return theta, {"eps": eps}

    def backward(self, cache: dict, grad_theta: np.ndarray) -> list[np.ndarray]:
        eps = cache["eps"]
        grad_mu = grad_theta.sum(axis=0)
        grad_log_std = (grad_theta * eps).sum(axis=0) * np.exp(self.log_std)
        return [grad_mu, grad_log_std]

    def spec_dict(self) -> dict:
        return {"family": "no-latent",
                "layout": [self.layout.n_data, self.layout.m_anc, self.layout.n_layers]}


class RdGenerator:
    """Random-deterministic hybrid.

    Layers 0..L/2 get frozen per-sample random angles from an M-mode Gaussian
    mixture (centers ~ N(0, I), component std e^{-1}); the remaining L/2
    layers share one trainable angle block.
    """

    def __init__(self, layout: QubitLayout, modes: int, centers: np.ndarray,
                 trainable: np.ndarray | None = None):
        if layout.n_layers % 2 != 0:
            raise ValueError("RD baseline needs an even layer count")
        self.layout = layout
        self.modes = modes
        n = layout.n_qubits
        self.n_random = 2 * n * (layout.n_layers // 2 + 1)
        self.n_trainable = layout.n_params - self.n_random
        centers = np.asarray(centers, dtype=np.float64)
        if centers.shape != (modes, self.n_random):
            raise ValueError(f"centers must have shape ({modes}, {self.n_random})")
        self.centers = centers
        self.trainable = (
            np.zeros(self.n_trainable) if trainable is None
            else np.asarray(trainable, dtype=np.float64)
        )

    @classmethod
    def init(cls, layout: QubitLayout, modes: int, rng: np.random.Generator) -> "RdGenerator":
        if layout.n_layers % 2 != 0:
            raise ValueError("RD baseline needs an even layer count")
        n_random = 2 * layout.n_qubits * (layout.n_layers // 2 + 1)
        return cls(layout, modes, rng.standard_normal((modes, n_random)))

    def parameters(self) -> list[np.ndarray]:
        return [self.trainable]

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, dict]:
        modes = rng.integers(0, self.modes, size=count)
        rand_block = self.centers[modes] + MIXTURE_COMPONENT_STD * rng.standard_normal(
            (count, self.n_random)
        )
        theta = np.concatenate(
            [rand_block, np.broadcast_to(self.trainable, (count, self.n_trainable))], axis=1
        )
        return theta, {}

    def backward(self, cache: dict, grad_theta: np.ndarray) -> list[np.ndarray]:
        return [grad_theta[:, self.n_random :].sum(axis=0)]

    def spec_dict(self) -> dict:
        return {"family": "rd", "modes": self.modes,
                "layout": [self.layout.n_data, self.layout.m_anc, self.layout.n_layers]}


def lmlp_output_dim(n_data: int, variant: str) -> int:
    """Raw real output size: 2 * 4^n for the matrix variant, 2 * 2^n for vector."""
    if variant == "matrix":
        return 2 * 4**n_data
    if variant == "vector":
        return 2 * 2**n_data
    raise ValueError(f"unknown LMLP variant {variant!r}")


class LmlpGenerator:
    """Classical baseline emitting density-matrix parameterizations.

    matrix variant (used when the LPQC it mirrors has ancillas): the output
    is read as A = Re + i Im (row-major halves) and projected to
    rho = A A^dag / tr(A A^dag); vector variant: a normalized complex state
    vector defining a pure state.
    """

    def __init__(self, n_data: int, variant: str, mlp: Mlp):
        if mlp.spec.d_out != lmlp_output_dim(n_data, variant):
            raise ValueError("MLP output size does not match the LMLP variant")
        self.n_data = n_data
        self.variant = variant
        self.mlp = mlp
        self.dim = 2**n_data

    @classmethod
    def init(
        cls, n_data: int, variant: str, latent_dim: int, hidden_dim: int,
        hidden_layers: int, rng: np.random.Generator, activation: str = "tanh",
    ) -> "LmlpGenerator":
        spec = MlpSpec(latent_dim, hidden_dim, hidden_layers,
                       lmlp_output_dim(n_data, variant), activation)
        return cls(n_data, variant, Mlp.init(spec, rng))

    def parameters(self) -> list[np.ndarray]:
        return self.mlp.parameters()

    def forward(self, z: np.ndarray) -> tuple[np.ndarray, dict]:
        """Density matrices (B, 2^n, 2^n) plus backward cache."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        mlp_cache: list = []
        raw = self.mlp.forward(z, cache=mlp_cache)
        half = raw.shape[1] // 2
        d = self.dim
        if self.variant == "matrix":
            a = (raw[:, :half] + 1j * raw[:, half:]).reshape(-1, d, d)
            gram = a @ a.conj().transpose(0, 2, 1)
            tr = np.einsum("bii->b", gram).real
            if np.any(tr < 1e-12):
                raise ValueError("degenerate LMLP output: tr(A A^dag) < 1e-12")
            rho = gram / tr[:, None, None]
            cache = {"mlp_cache": mlp_cache, "a": a, "tr": tr, "rho": rho}
        else:
            u = raw[:, :half] + 1j * raw[:, half:]
            sq = np.sum(np.abs(u) ** 2, axis=1)
            if np.any(sq < 1e-12):
                raise ValueError("degenerate LMLP output: |u|^2 < 1e-12")
            psi = u / np.sqrt(sq)[:, None]
            rho = psi[:, :, None] * psi.conj()[:, None, :]
            cache = {"mlp_cache": mlp_cache, "u": u, "sq": sq}
        return rho, cache

    def backward(self, cache: dict, grad_rho: np.ndarray) -> list[np.ndarray]:
        """MLP-weight gradients given Hermitian cotangents dL/drho (B, d, d)."""
        d = self.dim
        if self.variant == "matrix":
            a, tr, rho = cache["a"], cache["tr"], cache["rho"]
            inner = np.einsum("bij,bji->b", grad_rho, rho).real
            # Wirtinger gradient X with dL = 2 Re tr(X^dag dA)
            x = (grad_rho @ a - inner[:, None, None] * a) / tr[:, None, None]
            raw_grad = np.concatenate(
                [2 * x.real.reshape(-1, d * d), 2 * x.imag.reshape(-1, d * d)], axis=1
            )
        else:
            u, sq = cache["u"], cache["sq"]
            gu = np.einsum("bij,bj->bi", grad_rho, u)
            val = np.einsum("bi,bi->b", u.conj(), gu).real / sq
            x = (gu - val[:, None] * u) / sq[:, None]
            raw_grad = np.concatenate([2 * x.real, 2 * x.imag], axis=1)
        grads, _ = self.mlp.backward(cache["mlp_cache"], raw_grad)
        return grads

    def spec_dict(self) -> dict:
        s = self.mlp.spec
        return {"family": "lmlp", "n_data": self.n_data, "variant": self.variant,
                "latent_dim": s.d_in, "hidden_dim": s.hidden_dim,
                "hidden_layers": s.hidden_layers, "activation": s.activation}


def lmlp_state(gen: LmlpGenerator, z: np.ndarray) -> np.ndarray:
    """Single-latent density matrix from the LMLP baseline."""
    rho, _ = gen.forward(np.asarray(z, dtype=np.float64)[None, :])
    return rho[0]


# --- checkpoint format --------------------------------------------------------
#
# Flat binary layout, little-endian:
#   magic "LPQW" | version u16 | spec-JSON length u32 | spec JSON (utf-8)
#   | tensor count u16 | per tensor: rank u16, shape u32 each
#   | all tensor payloads as float64 in declaration order.

_CKPT_MAGIC = b"LPQW"
_CKPT_VERSION = 1


def save_checkpoint(path, spec: dict, params: list[np.ndarray]) -> None:
    blob = json.dumps(spec, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HI", _CKPT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<H", len(params)))
        for p in params:
            fh.write(struct.pack("<H", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}I", *p.shape))
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a weight checkpoint (bad magic)")
        version, spec_len = struct.unpack("<HI", fh.read(6))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        spec = json.loads(fh.read(spec_len).decode("utf-8"))
        (count,) = struct.unpack("<H", fh.read(2))
        shapes = []
        for _ in range(count):
            (rank,) = struct.unpack("<H", fh.read(2))
            shapes.append(struct.unpack(f"<{rank}I", fh.read(4 * rank)))
        params = []
        for shape in shapes:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated checkpoint payload")
            params.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    return spec, params
