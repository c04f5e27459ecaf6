"""Generator backends: pluggable engines that produce candidate questions,
probability estimates, and simulated patient behavior."""

from .base import (
    BackendConfig,
    ElicitationResult,
    GeneratorBackend,
    MemoizingBackend,
    PromptLibrary,
)
from .scripted import ScriptedBackend


def make_backend(config: BackendConfig) -> GeneratorBackend:
    """Instantiate the backend named by the config."""
    config.validate()
    if config.kind == "scripted":
        return ScriptedBackend(config)
    from .remote import RemoteBackend

    return RemoteBackend(config)


__all__ = [
    "BackendConfig",
    "ElicitationResult",
    "GeneratorBackend",
    "MemoizingBackend",
    "PromptLibrary",
    "ScriptedBackend",
    "make_backend",
]
