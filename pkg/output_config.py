#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Centralized configuration and output locations for the mlproc toolchain.
All commands import from this file to ensure consistent defaults.

Precedence: command-line flags > environment (.env included) > defaults.
"""

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

load_dotenv()

# Base output directory
OUTPUT_BASE = Path(os.getenv("MLPROC_OUTPUT_DIR", "outputs"))

DEFAULT_NAMESPACE = "http://mlproc.example/process"

_TRUE = {"1", "true", "yes", "on"}


class Settings(BaseModel):
    """Environment-driven settings; read once per command."""
    log_level: str = "WARNING"
    namespace: str = DEFAULT_NAMESPACE
    output_dir: Path = Path("outputs")
    html_single_file: bool = True

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        v = v.strip().upper()
        if v not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return v

    @classmethod
    def from_env(cls) -> "Settings":
        env = os.environ
        return cls(
            log_level=env.get("MLPROC_LOG_LEVEL", "WARNING"),
            namespace=env.get("MLPROC_NAMESPACE") or DEFAULT_NAMESPACE,
            output_dir=Path(env.get("MLPROC_OUTPUT_DIR", "outputs")),
            html_single_file=env.get("MLPROC_HTML_SINGLE_FILE", "true").strip().lower() in _TRUE,
        )


class ExportOptions(BaseModel):
    """Switches of the BPMN exporter."""
    model_config = {"frozen": True}

    target_namespace: str = Field(default=DEFAULT_NAMESPACE)
    emit_data_associations: bool = True
    emit_performers: bool = True
    insert_gateways: bool = True

    @field_validator("target_namespace")
    @classmethod
    def _non_empty(cls, v: str) -> str:
        if not v or not v.strip():
            raise ValueError("targetNamespace must not be empty")
        return v


def get_settings() -> Settings:
    return Settings.from_env()


class OutputPaths:
    """Default output locations derived from one input model path."""

    def __init__(self, input_path: Path, output_dir: Optional[Path] = None):
        self.input_path = Path(input_path)
        self.output_dir = Path(output_dir) if output_dir is not None else OUTPUT_BASE

    @property
    def stem(self) -> str:
        return self.input_path.stem

    @property
    def bpmn(self) -> Path:
        return self.output_dir / f"{self.stem}.bpmn"

    @property
    def html_dir(self) -> Path:
        return self.output_dir / f"{self.stem}_html"

    @property
    def event_log(self) -> Path:
        # written next to the input: tdsp.mlproc -> tdsp.mlproc.log
        return self.input_path.with_name(self.input_path.name + ".log")
