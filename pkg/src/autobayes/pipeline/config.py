"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class HyperParams:
    lambda_s: float = 0.01
    lambda_x: float = 0.01
    lambda_z: float = 0.01
    lambda_a: float = 0.01
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    # tau_t = max(floor, initial * exp(-rate * step))
    tau_schedule: tuple = (5.0, 0.01, 0.5)
    latent_dim: int = 8
    seed: int = 0
    adversary_steps: int = 1
    plateau_patience: int = 3
    plateau_tolerance: float = 1e-4
    encoder_hidden: int = 64
    decoder_hidden: int = 64

    def __post_init__(self):
        for name in ("lambda_s", "lambda_x", "lambda_z", "lambda_a"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name in ("batch_size", "epochs", "latent_dim", "encoder_hidden", "decoder_hidden", "plateau_patience"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.adversary_steps < 0:
            raise ValueError("adversary_steps must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        sched = tuple(float(v) for v in self.tau_schedule)
        if len(sched) != 3 or sched[0] <= 0 or sched[1] < 0 or sched[2] <= 0:
            raise ValueError("tau_schedule must be (initial > 0, rate >= 0, floor > 0)")
        object.__setattr__(self, "tau_schedule", sched)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_schedule"] = list(self.tau_schedule)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**{k: tuple(v) if k == "tau_schedule" else v for k, v in d.items()})

    def with_(self, **changes) -> "HyperParams":
        return replace(self, **changes)
