from functools import lru_cache
from pathlib import Path
from typing import Annotated

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from .errors import ConfigurationError

# ARM convention throughout: numerically lower level = higher priority.
THREAD_LEVELS = 32
DEFAULT_THREAD_PRIORITY = 16
DEFAULT_IRQ_PRIORITY = 13

LevelList = Annotated[tuple[int, ...], NoDecode]


class Config(BaseSettings):
    """Kernel model configuration, read from a flat key=value file."""
    model_config = SettingsConfigDict(
        env_file_encoding="utf-8",
        extra="forbid",
        frozen=True,
    )

    # Processes
    n_user_tasks: int = Field(default=2, ge=1, le=16)
    n_extra_interrupts: int = Field(default=0, ge=0, le=8)

    # Exception priorities (0..255)
    kernel_priority: int = Field(default=15, ge=0, le=255)
    systick_priority: int = Field(default=14, ge=0, le=255)
    irq_priorities: LevelList = ()

    # Thread priorities (0..31)
    task_priorities: LevelList = ()
    softirq_priority: int = Field(default=DEFAULT_THREAD_PRIORITY, ge=0, lt=THREAD_LEVELS)

    # Capacities
    buffer_capacity: int = Field(default=1, ge=1, le=16)
    mutex_wait_capacity: int = Field(default=1, ge=1, le=16)
    progress_window: int = Field(default=3, ge=1, le=16)

    # Search limits
    max_depth: int = Field(default=1_000_000, ge=1)
    max_states: int = Field(default=20_000_000, ge=1)
    max_memory_mb: int = Field(default=8192, ge=1)
    debug_store: bool = False

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # The config file is the only outside source; the environment is ignored.
        return (init_settings, dotenv_settings)

    @field_validator("irq_priorities", "task_priorities", mode="before")
    @classmethod
    def _split_levels(cls, value):
        if isinstance(value, str):
            return tuple(int(part) for part in value.split(",") if part.strip())
        return value

    @model_validator(mode="after")
    def _check_priorities(self):
        if self.systick_priority >= self.kernel_priority:
            raise ValueError(
                f"systick_priority ({self.systick_priority}) must be strictly higher "
                f"(numerically lower) than the SVC/PendSV level ({self.kernel_priority})"
            )
        if self.irq_priorities and len(self.irq_priorities) != self.n_extra_interrupts:
            raise ValueError("irq_priorities needs one level per extra interrupt")
        for level in self.irq_priorities:
            if not 0 <= level < self.kernel_priority:
                raise ValueError(f"interrupt level {level} must rank above the SVC/PendSV level")
        if self.task_priorities and len(self.task_priorities) != self.n_user_tasks:
            raise ValueError("task_priorities needs one level per user task")
        for level in self.task_priorities:
            if not 0 <= level < THREAD_LEVELS:
                raise ValueError(f"thread level {level} outside 0..{THREAD_LEVELS - 1}")
        return self

    def task_priority(self, index: int) -> int:
        if self.task_priorities:
            return self.task_priorities[index]
        return DEFAULT_THREAD_PRIORITY

    def irq_priority(self, index: int) -> int:
        if self.irq_priorities:
            return self.irq_priorities[index]
        return DEFAULT_IRQ_PRIORITY

    def with_limits(self, **limits) -> "Config":
        """Copy with some search limits overridden (CLI flags)."""
        return self.model_copy(update={k: v for k, v in limits.items() if v is not None})


def make_config(**values) -> Config:
    """Build a config from keyword values, mapping validation failures."""
    try:
        return Config(**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


@lru_cache
def load_config(path: str | Path) -> Config:
    """Load and validate a key=value config file (cached per path)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return Config(_env_file=path)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration in {path}: {e}") from e
