from .app import DEFAULT_ACTIONS, create_app

__all__ = ["DEFAULT_ACTIONS", "create_app"]
__version__ = "0.1.0"
