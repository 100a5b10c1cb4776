"""Event-driven multi-agent orchestration for RTL design and formal sign-off."""

__version__ = "0.1.0"
