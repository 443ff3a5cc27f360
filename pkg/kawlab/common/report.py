"""
Self-verifying report files.

A report is a key = value header, a list of checks and named CSV tables::

    KAWLAB-REPORT 1
    kind = probe
    eta = 0.005566
    [check] false_positive_budget : norm(e) <= key(eta) ; tol=1e-12
    [table e]
    re,im
    ...

Check expressions are evaluated from the stored values, so every inequality a
report asserts is re-checked whenever the report is loaded.
"""

import ast
import io
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, WitnessError

REPORT_MAGIC = "KAWLAB-REPORT 1"
CONFIG_PREFIX = "config| "
_RELATIONS = ("<=", ">=", "==")
_CHECK_RE = re.compile(r"^\[check\]\s+(?P<name>[\w.\-]+)\s*:\s*(?P<body>.+?)\s*;\s*tol=(?P<tol>\S+)\s*$")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "1e999" if value > 0 else "-1e999"
        return f"{float(value):.17g}"
    return str(value)


@dataclass
class Check:
    name: str
    lhs: str
    rel: str
    rhs: str
    tol: float = 0.0

    def line(self) -> str:
        return f"[check] {self.name} : {self.lhs} {self.rel} {self.rhs} ; tol={self.tol:.3g}"


@dataclass
class CheckResult:
    name: str
    lhs: float
    rel: str
    rhs: float
    passed: bool


@dataclass
class Table:
    columns: List[str]
    rows: List[List[str]] = field(default_factory=list)

    def csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(row) for row in self.rows)
        return "\n".join(lines) + "\n"


class Report:
    """Header values, checks and tables; round-trips through to_text/from_text."""

    def __init__(self, kind: str):
        self.header: Dict[str, str] = {"kind": kind}
        self.checks: List[Check] = []
        self.tables: Dict[str, Table] = {}
        self.config_text: Optional[str] = None

    @property
    def kind(self) -> str:
        return self.header["kind"]

    def set(self, key: str, value) -> "Report":
        if not re.fullmatch(r"[\w.\-]+", key):
            raise ValueError(f"invalid report key {key!r}")
        self.header[key] = _fmt(value)
        return self

    def get(self, key: str) -> str:
        return self.header[key]

    def get_float(self, key: str) -> float:
        return float(self.header[key])

    def add_table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence]) -> "Report":
        self.tables[name] = Table(list(columns), [[_fmt(v) for v in row] for row in rows])
        return self

    def add_vector(self, name: str, vec) -> "Report":
        arr = np.asarray(vec, dtype=complex).ravel()
        return self.add_table(name, ["re", "im"], [[v.real, v.imag] for v in arr])

    def vector(self, name: str) -> np.ndarray:
        table = self.tables[name]
        if table.columns != ["re", "im"]:
            raise WitnessError(f"table {name!r} is not a vector")
        return np.asarray([complex(float(a), float(b)) for a, b in table.rows], dtype=complex)

    def column(self, table: str, column: str) -> np.ndarray:
        t = self.tables[table]
        idx = t.columns.index(column)
        return np.asarray([float(row[idx]) for row in t.rows])

    def add_check(self, name: str, lhs, rel: str, rhs, tol: float = 0.0) -> "Report":
        if rel not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}")
        check = Check(name, _fmt(lhs), rel, _fmt(rhs), float(tol))
        self.checks.append(check)
        return self

    def embed_config(self, text: str) -> "Report":
        self.config_text = text
        return self

    # evaluation

    def _eval(self, expr: str) -> float:
        tree = ast.parse(expr, mode="eval")
        return float(self._eval_node(tree.body))

    def _eval_node(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -self._eval_node(node.operand)
        if isinstance(node, ast.BinOp):
            a, b = self._eval_node(node.left), self._eval_node(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
            if isinstance(node.op, ast.Pow):
                return a ** b
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fn = node.func.id
            names = [a.id for a in node.args if isinstance(a, ast.Name)]
            if fn == "key" and len(names) == 1:
                return float(self.header[names[0]])
            if fn == "norm" and len(names) == 1:
                return float(np.linalg.norm(self.vector(names[0])))
            if fn == "dist" and len(names) == 2:
                return float(np.linalg.norm(self.vector(names[0]) - self.vector(names[1])))
            if fn == "colmax" and len(names) == 2:
                return float(np.max(self.column(names[0], names[1])))
            if fn == "colmin" and len(names) == 2:
                return float(np.min(self.column(names[0], names[1])))
            values = [self._eval_node(a) for a in node.args]
            if fn == "sqrt" and len(values) == 1:
                return math.sqrt(values[0])
            if fn == "max" and values:
                return max(values)
            if fn == "min" and values:
                return min(values)
        raise WitnessError(f"unsupported check expression: {ast.dump(node)}")

    def evaluate_checks(self) -> List[CheckResult]:
        out = []
        for check in self.checks:
            try:
                lhs, rhs = self._eval(check.lhs), self._eval(check.rhs)
            except (KeyError, ValueError, ZeroDivisionError) as e:
                raise WitnessError(f"check {check.name!r} cannot be evaluated: {e}") from e
            if check.rel == "<=":
                ok = lhs <= rhs + check.tol
            elif check.rel == ">=":
                ok = lhs >= rhs - check.tol
            else:
                ok = abs(lhs - rhs) <= check.tol
            out.append(CheckResult(check.name, lhs, check.rel, rhs, bool(ok)))
        return out

    def failed_checks(self) -> List[CheckResult]:
        return [c for c in self.evaluate_checks() if not c.passed]

    def verify(self) -> "Report":
        failed = self.failed_checks()
        if failed:
            names = ", ".join(f"{c.name} ({c.lhs:.6g} {c.rel} {c.rhs:.6g})" for c in failed)
            raise WitnessError(f"{self.kind} report failed re-verification: {names}")
        return self

    # serialization

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(REPORT_MAGIC + "\n")
        for key, value in self.header.items():
            buf.write(f"{key} = {value}\n")
        for check in self.checks:
            buf.write(check.line() + "\n")
        if self.config_text:
            for line in self.config_text.rstrip("\n").splitlines():
                buf.write(CONFIG_PREFIX + line + "\n")
        for name, table in self.tables.items():
            buf.write(f"[table {name}]\n")
            buf.write(table.csv())
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, verify: bool = True) -> "Report":
        lines = text.splitlines()
        if not lines or lines[0].strip() != REPORT_MAGIC:
            raise ConfigError("not a kawlab report", line=1)
        report = cls("unknown")
        report.header.clear()
        config_lines = []
        current: Optional[Table] = None
        for lineno, raw in enumerate(lines[1:], start=2):
            if raw.startswith(CONFIG_PREFIX):
                config_lines.append(raw[len(CONFIG_PREFIX):])
                continue
            line = raw.strip()
            if not line:
                continue
            if line.startswith("[table ") and line.endswith("]"):
                current = None
                name = line[len("[table "):-1].strip()
                report.tables[name] = Table([])
                current = report.tables[name]
                continue
            if line.startswith("[check]"):
                m = _CHECK_RE.match(line)
                if not m:
                    raise ConfigError(f"malformed check: {line!r}", line=lineno)
                body = m.group("body")
                for rel in _RELATIONS:
                    if f" {rel} " in body:
                        lhs, rhs = body.split(f" {rel} ", 1)
                        break
                else:
                    raise ConfigError(f"check without relation: {line!r}", line=lineno)
                report.checks.append(Check(m.group("name"), lhs.strip(), rel, rhs.strip(), float(m.group("tol"))))
                continue
            if current is not None:
                cells = line.split(",")
                if not current.columns:
                    current.columns = cells
                else:
                    current.rows.append(cells)
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
            key, value = line.split("=", 1)
            report.header[key.strip()] = value.strip()
        if "kind" not in report.header:
            raise ConfigError("report header lacks 'kind'")
        if config_lines:
            report.config_text = "\n".join(config_lines) + "\n"
        if verify:
            report.verify()
        return report
