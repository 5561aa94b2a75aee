"""Run configuration and its flat ``key = value`` file format.

Files are UTF-8 text, one ``key = value`` per line; ``#`` starts a comment,
blank lines are ignored and unknown keys are errors. ``none`` (or an empty
value) selects the environment-dependent default for ``total_episodes`` and
``grad_clip_max_norm``. ``hidden`` is a comma-separated list of widths.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..disrc_agent import DISRCAgent
from ..dqn import DEFAULT_EPISODES, DEFAULT_GRAD_CLIP, DQNAgent
from ..exceptions import ConfigurationError
from ..gridworld import ENV_IDS

AGENTS = {"dqn": DQNAgent, "disrc": DISRCAgent}

# config-file key -> estimator parameter, where they differ
_PARAM_ALIASES = {"lambda": "lam", "seed": "random_state"}


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_hidden(s: str) -> tuple[int, ...]:
    return tuple(int(part) for part in s.replace(" ", "").split(",") if part)


def _optional(conv):
    def parse(s: str):
        return None if s.strip().lower() in ("", "none") else conv(s)

    return parse


@dataclass
class RunConfig:
    env: str = "doorkey8"
    agent: str = "dqn"
    total_episodes: int | None = None
    seed: int = 0
    out_dir: str = "runs/default"
    save_checkpoint: bool = False
    # shared DQN hyperparameters
    gamma: float = 0.99
    q_lr: float = 1e-4
    tau: float = 0.005
    batch_size: int = 128
    eps_start: float = 1.0
    eps_min: float = 0.1
    eps_decay_fraction: float = 0.8
    grad_clip_max_norm: float | None = None
    hidden: tuple[int, ...] = (256, 256)
    buffer_capacity: int = 50_000
    target_rule: str = "double"
    # DISRC only
    beta0: float = 0.2
    lam: float = field(default=1.0, metadata={"key": "lambda"})
    rho_mu: float = 0.995
    rho_r: float = 0.99
    encoder_mode: str = "reconstruction"
    encoder_lr: float = 3e-4
    latent_dim: int = 64
    modulation: str = "reward_shaping"
    norm_eps: float = 1e-8

    def __post_init__(self):
        self.validate()

    @staticmethod
    def key_of(f) -> str:
        return f.metadata.get("key", f.name)

    @classmethod
    def keys(cls) -> list[str]:
        return [cls.key_of(f) for f in fields(cls)]

    def validate(self):
        if self.env not in ENV_IDS:
            raise ConfigurationError(f"env must be one of {ENV_IDS}, got {self.env!r}")
        if self.agent not in AGENTS:
            raise ConfigurationError(f"agent must be one of {tuple(AGENTS)}, got {self.agent!r}")
        if self.total_episodes is not None and self.total_episodes < 1:
            raise ConfigurationError("total_episodes must be >= 1")
        # The estimators perform the remaining range checks. DISRC accepts every
        # key, so DISRC-only values are checked even when agent = dqn.
        DISRCAgent(**self.agent_params("disrc"))._validate_params()

    def resolved(self) -> "RunConfig":
        """Copy with environment-dependent defaults filled in."""
        out = dataclasses.replace(self)
        if out.total_episodes is None:
            out.total_episodes = DEFAULT_EPISODES[self.env]
        if out.grad_clip_max_norm is None:
            out.grad_clip_max_norm = DEFAULT_GRAD_CLIP[self.env]
        return out

    def agent_params(self, agent: str | None = None) -> dict:
        cls = AGENTS[agent or self.agent]
        accepted = cls._get_param_names()
        params = {}
        for f in fields(self):
            name = _PARAM_ALIASES.get(f.name, f.name)
            if name in accepted:
                params[name] = getattr(self, f.name)
        return params

    def make_agent(self):
        return AGENTS[self.agent](**self.agent_params())

    def with_overrides(self, **overrides) -> "RunConfig":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ConfigurationError(f"unknown config keys: {sorted(bad)}")
        return dataclasses.replace(self, **overrides)

    # -- text format -----------------------------------------------------------

    def to_text(self, header: str | None = None) -> str:
        lines = []
        if header:
            lines.extend(f"# {h}" for h in header.splitlines())
        for f in fields(self):
            lines.append(f"{self.key_of(f)} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        return cls(**parse_assignments(text.splitlines(), source))

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, str(path))

    def write_echo(self, path) -> None:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        Path(path).write_text(self.to_text(f"written {stamp}"), encoding="utf-8", newline="\n")


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parsers() -> dict:
    out = {}
    for f in fields(RunConfig):
        default = f.default
        if f.name in ("total_episodes",):
            conv = _optional(int)
        elif f.name == "grad_clip_max_norm":
            conv = _optional(float)
        elif f.name == "hidden":
            conv = _parse_hidden
        elif isinstance(default, bool):
            conv = _parse_bool
        elif isinstance(default, int):
            conv = int
        elif isinstance(default, float):
            conv = float
        else:
            conv = str
        out[RunConfig.key_of(f)] = (f.name, conv)
    return out


def parse_assignments(lines, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into RunConfig keyword arguments."""
    parsers = _parsers()
    kwargs = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in parsers:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = parsers[key]
        try:
            kwargs[name] = conv(value)
        except ValueError as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return kwargs
