"""Gateway service package.

`uvicorn itemledger.api:app` serves the store named by ITEMLEDGER_STORE.
"""

from .app import create_app


def __getattr__(name):
    # build the default app lazily so importing the package never needs env
    if name == "app":
        return create_app()
    raise AttributeError(name)


__all__ = ["app", "create_app"]
