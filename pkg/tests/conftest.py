import sympy as sp

from lcsmech.expr import Expr


def to_sympy(e) -> sp.Expr:
    """Independent reading of an expression through its printed form."""
    text = str(Expr.coerce(e)).replace("^", "**")
    return sp.sympify(text, locals={"ln": sp.log, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos})


def sym(*names):
    return sp.symbols(" ".join(names)) if len(names) > 1 else sp.Symbol(names[0])
