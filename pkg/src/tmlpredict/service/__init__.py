"""FastAPI service wrapping the prediction engine."""

from .app import ConversationManager, create_app

__all__ = ["ConversationManager", "create_app"]
