"""Text and LaTeX renderings of parameter elements and differential polynomials.

Output order is fixed by names, not by registration order, so that renderings
are identical across processes.  Text output re-parses to an equal object.
"""

from __future__ import annotations

from gmpy2 import mpq

from ..algebra import ParamElem, symbol_name
from ..jet import (
    KIND_T, KIND_TAUX, KIND_U, KIND_X, KIND_XAUX, ORDER_BITS, ORDER_MASK,
    DiffPoly, family_kind, family_name,
)


def _pmono_items(m: tuple) -> list[tuple[str, int]]:
    return sorted((symbol_name(i), e) for i, e in enumerate(m) if e)


def _pmono_key(m: tuple):
    items = _pmono_items(m)
    return (-sum(e for _, e in items), [(n, -e) for n, e in items])


def _rat_text(c: mpq) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _poly_terms(poly: dict) -> list[tuple[mpq, list[tuple[str, int]]]]:
    return [(poly[m], _pmono_items(m)) for m in sorted(poly, key=_pmono_key)]


def _term_text(c: mpq, items: list[tuple[str, int]], latex: bool) -> tuple[bool, str]:
    """Render ``|c| * monomial``; returns (negative, text)."""
    neg = c < 0
    c = -c if neg else c
    up = [(n, e) for n, e in items if e > 0]
    down = [(n, -e) for n, e in items if e < 0]

    def pw(n, e):
        if latex:
            n = _latex_symbol(n)
            return n if e == 1 else f"{n}^{{{e}}}"
        return n if e == 1 else f"{n}^{e}"

    if latex:
        top = [] if (c.numerator == 1 and up) else [str(c.numerator)]
        top += [pw(n, e) for n, e in up]
        bottom = [] if c.denominator == 1 else [str(c.denominator)]
        bottom += [pw(n, e) for n, e in down]
        num = " ".join(top) or "1"
        if bottom:
            return neg, f"\\frac{{{num}}}{{{' '.join(bottom)}}}"
        return neg, num
    parts = [] if (c == 1 and up) else [_rat_text(c) if not down or c.denominator == 1
                                         else str(c.numerator)]
    parts += [pw(n, e) for n, e in up]
    text = "*".join(parts) if parts else "1"
    dens = ([str(c.denominator)] if down and c.denominator != 1 else [])
    dens += [pw(n, e) for n, e in down]
    for d in dens:
        text += f"/{d}"
    return neg, text


def _poly_text(poly: dict, latex: bool) -> tuple[str, int]:
    """Signed sum; returns (text, number of terms)."""
    out = []
    for i, (c, items) in enumerate(_poly_terms(poly)):
        neg, t = _term_text(c, items, latex)
        if i == 0:
            out.append(f"-{t}" if neg else t)
        else:
            out.append(f" - {t}" if neg else f" + {t}")
    return "".join(out) or "0", len(poly)


def render_param(e: ParamElem, latex: bool = False) -> str:
    num, n = _poly_text(e.num, latex)
    if e.den is None:
        return num
    den, _ = _poly_text(e.den, latex)
    if latex:
        return f"\\frac{{{num}}}{{{den}}}"
    if n > 1:
        num = f"({num})"
    return f"{num}/({den})"


# -- jet variables ------------------------------------------------------------


def var_text(key: int) -> str:
    fid, k = key >> ORDER_BITS, key & ORDER_MASK
    kind = family_kind(fid)
    name = family_name(fid)
    if kind in (KIND_X, KIND_T):
        return name
    if kind == KIND_U:
        if k == 0:
            return "u"
        return "u_" + "x" * k if k <= 3 else f"u_{k}"
    if k <= 2:
        return name + "'" * k
    return f"{name}_{k}"


def var_latex(key: int) -> str:
    fid, k = key >> ORDER_BITS, key & ORDER_MASK
    kind = family_kind(fid)
    name = family_name(fid)
    if kind in (KIND_X, KIND_T):
        return name
    if kind == KIND_U:
        if k == 0:
            return "u"
        return "u_{" + "x" * k + "}" if k <= 6 else f"u_{{{k}x}}"
    base = _latex_symbol(name)
    if k <= 3:
        return base + "'" * k
    return f"{base}^{{({k})}}"


def _latex_symbol(name: str) -> str:
    head, _, tail = name.partition("_")
    if not tail and len(name) > 1 and name[-1].isdigit():
        i = len(name.rstrip("0123456789"))
        head, tail = name[:i], name[i:]
    return f"{head}_{{{tail}}}" if tail else head


def _mono_sort_key(m: tuple):
    # heavier (more derivatives), then higher degree, first; ties by names
    weight = sum(k & ORDER_MASK for k in m)
    names = sorted(((family_name(k >> ORDER_BITS), k & ORDER_MASK) for k in m), reverse=True)
    return (-weight, -len(m), [(n, -o) for n, o in names])


def sorted_monomials(p: DiffPoly) -> list[tuple]:
    return sorted(p.terms, key=_mono_sort_key)


def _mono_text(m: tuple, latex: bool) -> str:
    parts = []
    i = 0
    while i < len(m):
        k = m[i]
        e = m.count(k)
        v = var_latex(k) if latex else var_text(k)
        if e > 1:
            v = f"{{{v}}}^{{{e}}}" if latex and ("_" in v or "'" in v) else (
                f"{v}^{{{e}}}" if latex else f"{v}^{e}")
        parts.append(v)
        i += e
    return (" " if latex else "*").join(parts)


def _coeff_parts(c) -> ParamElem:
    if isinstance(c, ParamElem):
        return c
    return ParamElem.const(c)


def render(p: DiffPoly, fmt: str = "text") -> str:
    """Deterministic text (re-parsable) or LaTeX rendering of ``p``."""
    latex = fmt == "latex"
    if not p.terms:
        return "0"
    chunks = []
    for m in sorted_monomials(p):
        c = _coeff_parts(p.terms[m])
        mono = _mono_text(m, latex)
        if c.den is None and len(c.num) == 1:
            (pm, q), = c.num.items()
            neg, ctext = _term_text(q, _pmono_items(pm), latex)
            if mono:
                if ctext == "1":
                    body = mono
                elif latex:
                    body = f"{ctext} {mono}"
                else:
                    body = f"{ctext}*{mono}"
            else:
                body = ctext
        else:
            neg = False
            ctext = render_param(c, latex)
            if latex:
                body = f"\\left({ctext}\\right) {mono}" if mono else f"\\left({ctext}\\right)"
            else:
                body = f"({ctext})*{mono}" if mono else f"({ctext})"
        if not chunks:
            chunks.append(f"-{body}" if neg else body)
        else:
            chunks.append(f" - {body}" if neg else f" + {body}")
    return "".join(chunks)


def render_latex(p: DiffPoly) -> str:
    return render(p, "latex")
