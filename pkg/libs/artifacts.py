"""
This module provides the artifact stores runs write their results to.

``ArtifactStore`` defines the interface; ``CsvStore`` writes versioned CSV
tables and a ``summary.txt`` of ``key=value`` lines into an output directory.
"""

import csv
import logging
import os

from . import SCHEMA_VERSION
from .utils import format_value, grouper

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.txt"

# Rows are written in chunks of this size.
CHUNK_SIZE = 1000

# Keys every run summary carries, "nan" when the mode has no network.
REQUIRED_SUMMARY_KEYS = ("max_junction_residual", "max_sum_to_one_residual", "mass_balance_error")


class ArtifactStore:
    """
    Base class for result stores.
    Subclasses implement the methods defined here for a concrete format.
    """

    def write_table(self, name, header, rows):
        """
        Writes one table.

        Args:
            name (str): Table name, without extension.
            header (list[str]): Column names.
            rows (iterable): Rows as tuples.
        """
        raise NotImplementedError

    def write_summary(self, summary):
        """
        Writes the run summary.

        Args:
            summary (dict): Key figures of the run.
        """
        raise NotImplementedError


class CsvStore(ArtifactStore):
    """
    CSV store over an output directory, used as a context manager.

    Every file starts with ``# schema: <version>`` and a header row; floats
    use 17 significant digits.
    """

    def __init__(self, out_dir, digits=17, chunk_size=CHUNK_SIZE):
        super().__init__()
        self.out_dir = out_dir
        self.digits = digits
        self.chunk_size = chunk_size
        self.written = []

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        log.info("artifacts - writing to %s", self.out_dir)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        log.info("artifacts - %d file(s) written to %s", len(self.written), self.out_dir)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_table(self, name, header, rows):
        filename = self.path(f"{name}.csv")
        count = 0
        with open(filename, "w", encoding="utf-8", newline="") as f:
            f.write(f"# schema: {SCHEMA_VERSION}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for chunk in grouper(rows, self.chunk_size):
                writer.writerows([format_value(v, self.digits) for v in row] for row in chunk)
                count += len(chunk)
        self.written.append(filename)
        log.debug("artifacts - %s: %d row(s)", filename, count)
        return filename

    def write_summary(self, summary):
        summary = dict(summary)
        for key in REQUIRED_SUMMARY_KEYS:
            summary.setdefault(key, None)
        filename = self.path(SUMMARY_FILE)
        with open(filename, "w", encoding="utf-8") as f:
            for key in sorted(summary):
                f.write(f"{key}={format_value(summary[key], self.digits)}\n")
        self.written.append(filename)
        return filename


def read_summary(out_dir):
    """
    Reads a run summary back.

    Args:
        out_dir (str): The output directory of a run.

    Returns:
        dict: ``key -> raw string value``; empty if there is no summary.
    """
    filename = os.path.join(out_dir, SUMMARY_FILE)
    if not os.path.isfile(filename):
        return {}
    summary = {}
    with open(filename, "r", encoding="utf-8") as f:
        for line in f:
            key, sep, value = line.rstrip("\n").partition("=")
            if sep:
                summary[key] = value
    return summary


def read_table(filename):
    """
    Reads a CSV table written by ``CsvStore``.

    Returns:
        tuple[str, list[str], list[list[str]]]: Schema, header and rows.
    """
    with open(filename, "r", encoding="utf-8", newline="") as f:
        schema = f.readline().strip().removeprefix("# schema:").strip()
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    return schema, header, rows
