"""Adapters for programs that run outside the interpreter."""
from services.external_flow import ExternalFlowClient

__all__ = ["ExternalFlowClient"]
