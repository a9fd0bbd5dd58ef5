"""Toolkit for running an English vision-language model in another language:
an I/O translation gateway, bulk round-trip dataset translation, a human
translation-quality audit, a VQA benchmark harness, and training-plan
emission for the finetuning variants.
"""

__version__ = "0.1.0"

from .records import (
    ChatTurn,
    ConversationRecord,
    EndpointConfig,
    LanguageTag,
    QualityGrade,
    SchemaError,
    Speaker,
)
from .translate import DriftFlag, TranslationEngine, TranslationResult, detect_drift

__all__ = [
    "ChatTurn",
    "ConversationRecord",
    "DriftFlag",
    "EndpointConfig",
    "LanguageTag",
    "QualityGrade",
    "SchemaError",
    "Speaker",
    "TranslationEngine",
    "TranslationResult",
    "detect_drift",
    "__version__",
]
