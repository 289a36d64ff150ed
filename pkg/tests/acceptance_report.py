"""Collects one verdict line per acceptance criterion."""

_results: dict[str, tuple[bool, str]] = {}


def record(key: str, title: str, ok: bool, detail: str = "") -> None:
    _results[key] = (ok, f"{'PASS' if ok else 'FAIL'}  [{key}] {title}" + (f": {detail}" if detail else ""))


def lines() -> list[str]:
    def order(key):
        head, _, tail = key.partition("(")
        return (int(head), tail)

    return [_results[k][1] for k in sorted(_results, key=order)]
