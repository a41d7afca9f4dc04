"""Validation helpers shared by config loading and JSON input files.

Raw mappings are first checked against the JSON schema of the target pydantic model, so
that every problem is reported with its field path, and only then parsed by pydantic.
"""

import logging
from typing import Any, TypeVar

from jsonschema import Draft7Validator, ValidationError
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from tohm.exceptions import ConfigError


logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def _format_validation_error(error: ValidationError) -> str:
    """Format a JSON schema validation error into a readable message.

    Args:
        error: The validation error to format

    Returns:
        Formatted error message
    """
    path = " -> ".join(str(p) for p in error.absolute_path) if error.absolute_path else "root"
    message = error.message

    if error.context:
        context_messages = [f"  - {e.message}" for e in error.context]
        context_str = "\n".join(context_messages)
        return f"Validation error at {path}: {message}\nContext:\n{context_str}"

    return f"Validation error at {path}: {message}"


def schema_errors(data: Any, schema: dict[str, Any]) -> list[str]:  # noqa: ANN401
    """All JSON schema violations of `data`, ordered by field path."""
    validator = Draft7Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.path])
    return [_format_validation_error(e) for e in errors]


def validate_mapping(
    model_cls: type[ModelT],
    data: Any,  # noqa: ANN401
    source: str | None = None,
) -> ModelT:
    """Validate a raw mapping against `model_cls`, schema first.

    Raises:
        ConfigError: With one message per offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError(
            [f"expected a mapping at the top level, got {type(data).__name__}"], source
        )

    errors = schema_errors(data, model_cls.model_json_schema())
    if errors:
        logger.debug(f"Schema validation of {source or 'input'} failed with {len(errors)} errors")
        raise ConfigError(errors, source)

    try:
        return model_cls.model_validate(data)
    except PydanticValidationError as ex:
        raise ConfigError(
            [
                f"Validation error at {' -> '.join(str(p) for p in err['loc']) or 'root'}: "
                f"{err['msg']}"
                for err in ex.errors()
            ],
            source,
        ) from ex
