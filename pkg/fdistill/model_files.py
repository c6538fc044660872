"""Module to save tabular models to json files and load them back."""

import json
from pathlib import Path
from typing import Any, Union

from fdistill.models import TabularARModel

MODEL_FORMAT = "fdistill-tabular-ar"
MODEL_FORMAT_VERSION = 1

_REQUIRED_FIELDS = ("vocab_size", "horizon", "order", "stationary", "logits")


def model_to_dict(model: TabularARModel) -> dict[str, Any]:
    """
    Convert a tabular model to a json-serialisable dictionary.

    Parameters
    ----------
    model : TabularARModel
        the model to convert

    Returns
    -------
    dict of str : Any
        format tag, version, layout fields and the logits as nested lists
    """
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "vocab_size": model.vocab_size,
        "horizon": model.horizon,
        "order": model.order,
        "stationary": model.stationary,
        "logits": model.logits.tolist(),
    }


def model_from_dict(data: dict[str, Any]) -> TabularARModel:
    """
    Rebuild a tabular model from a dictionary made by ``model_to_dict``.

    Parameters
    ----------
    data : dict of str : Any
        the model document

    Returns
    -------
    TabularARModel
        the reconstructed model

    Raises
    ------
    ValueError
        If the document has the wrong format tag or version, or misses fields.
    """
    if data.get("format") != MODEL_FORMAT:
        msg = f"Not an fdistill model document (format {data.get('format')!r})."
        raise ValueError(msg)
    if data.get("version") != MODEL_FORMAT_VERSION:
        msg = f"Unsupported model document version {data.get('version')!r}."
        raise ValueError(msg)
    missing = [field for field in _REQUIRED_FIELDS if field not in data]
    if missing:
        msg = f"Model document is missing fields {missing}."
        raise ValueError(msg)
    return TabularARModel(
        int(data["vocab_size"]),
        int(data["horizon"]),
        int(data["order"]),
        logits=data["logits"],
        stationary=bool(data["stationary"]),
    )


def write_model(model: TabularARModel, path: Union[str, Path]) -> None:
    """
    Write a tabular model to a json file.

    Parameters
    ----------
    model : TabularARModel
        the model to save
    path : str or Path
        destination file

    Notes
    -----
    Logits are written with the shortest decimal representation that reads back to
    the same double, so a write-read round trip is bit-exact. Forced models store
    their impossible tokens as ``-Infinity``.
    """
    with Path(path).open("w", encoding="utf-8") as model_file:
        json.dump(model_to_dict(model), model_file, indent=1)
        model_file.write("\n")


def read_model(path: Union[str, Path]) -> TabularARModel:
    """
    Read a tabular model from a json file written by ``write_model``.

    Parameters
    ----------
    path : str or Path
        source file

    Returns
    -------
    TabularARModel
        the loaded model

    Raises
    ------
    ValueError
        If the file is not a valid model document.
    """
    with Path(path).open(encoding="utf-8") as model_file:
        data = json.load(model_file)
    if not isinstance(data, dict):
        msg = f"{path} does not contain a model document."
        raise ValueError(msg)
    return model_from_dict(data)
