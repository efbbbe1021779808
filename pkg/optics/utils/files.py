# optics/utils/files.py
"""
Утилиты для работы с файлами артефактов
"""
import os
import tempfile
from pathlib import Path


def atomic_write_bytes(path, payload: bytes) -> Path:
    """
    Атомарная запись: пишем во временный файл рядом и переименовываем.

    Args:
        path: итоговый путь
        payload: содержимое

    Returns:
        Path: путь к записанному файлу
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def read_key_value(path) -> dict:
    """
    Читает текстовый файл вида "key = value" с комментариями "#".

    Returns:
        dict: пары ключ-значение в порядке появления (значения - строки)
    """
    result = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        if key in result:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        result[key] = value.strip()
    return result


def format_key_value(pairs: dict, header: str = "") -> str:
    lines = [f"# {row}" for row in header.splitlines()] if header else []
    lines.extend(f"{key} = {value}" for key, value in pairs.items())
    return "\n".join(lines) + "\n"


def ensure_empty_dir(path, force: bool = False) -> Path:
    """
    Готовит каталог вывода. Непустой каталог разрешен только с force.

    Raises:
        FileExistsError: каталог не пуст и force не указан
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()):
        if not force:
            raise FileExistsError(f"output directory is not empty: {path} (use --force)")
        for child in path.iterdir():
            if child.is_file() or child.is_symlink():
                child.unlink()
    path.mkdir(parents=True, exist_ok=True)
    return path
