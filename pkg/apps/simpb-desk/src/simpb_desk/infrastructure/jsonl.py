# Line-oriented JSON files shared by the scene and detection formats.
# Every record carries a schema_version; readers check it before validating the rest so
# that a file written by another version fails with a clear message instead of a wall of
# pydantic errors.

import json
from pathlib import Path
from typing import Iterable, TypeVar

from loguru import logger
from pydantic import BaseModel, ValidationError

from ..exceptions import DataError

Record = TypeVar("Record", bound=BaseModel)


def write_jsonl(path: Path, records: Iterable[BaseModel]) -> int:
    """Write one compact JSON object per line; floats keep full round-trip precision.

    Returns:
        int: Number of records written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json(by_alias=True))
            f.write("\n")
            count += 1
    return count


def read_jsonl(path: Path, model: type[Record], schema_version: int) -> list[Record]:
    """Parse a JSONL file into `model` instances.

    Args:
        path: File to read. Blank lines are skipped.
        model: Pydantic model of one line.
        schema_version: Version every line must declare.

    Raises:
        DataError: If the file is missing, a line is not JSON, declares another schema
            version or fails validation. The message names the file and the line.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e

    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            logger.error(f"{path}:{number}: malformed JSON")
            raise DataError(f"{path}: line {number}: malformed JSON ({e.msg})") from e
        if not isinstance(data, dict):
            raise DataError(f"{path}: line {number}: expected a JSON object")
        version = data.get("schema_version")
        if version != schema_version:
            raise DataError(
                f"{path}: line {number}: schema_version {version!r} is not supported (expected {schema_version})"
            )
        try:
            records.append(model.model_validate(data))
        except ValidationError as e:
            logger.error(f"{path}:{number}: invalid {model.__name__}")
            raise DataError(f"{path}: line {number}: invalid {model.__name__}: {e}") from e
    return records
