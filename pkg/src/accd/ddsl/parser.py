"""Recursive-descent DDSL parser.

Accepted grammar:

    program    := decl+ construct*
    decl       := "DVar" ident dtype literal? ";"
                | "DSet" ident dtype szref szref ";"
    dtype      := "int" | "float" | "double"
    szref      := ident | integer
    construct  := compdist | select | update | iter
    compdist   := "AccD_Comp_Dist" "(" ident "," ident "," ident "," ident
                  "," szref "," string "," szref ")" ";"
    select     := "AccD_Dist_Select" "(" ident "," ident "," szref ","
                  string "," ident ")" ";"
    update     := "AccD_Update" "(" ident ("," ident)+ ")" ";"
    iter       := "AccD_Iter" "(" (ident|integer) ")" "{" stmt+ "}"
    stmt       := construct | ident "=" ("true"|"false") ";"

Block comments `/* ... */` are whitespace. The semicolon after the last
statement of an iteration block may be omitted. Parsing either returns a
complete Program or raises DdslSyntaxError; there is no partial success.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import DdslSyntaxError, Span
from .ast import (
    ComputeDist,
    DistSelect,
    Iter,
    Program,
    SetDecl,
    SizeRef,
    StatusAssign,
    Update,
    VarDecl,
    DTYPE_MAP,
)

_PUNCT = set("(){},;=-")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT INT FLOAT STRING PUNCT EOF
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    def span(self) -> Span:
        return Span(self.line, self.col, self.end_line, self.end_col)


def _lex(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(expected, found, eline, ecol):
        raise DdslSyntaxError(eline, ecol, expected, found)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("/*", i):
            sl, sc = line, col
            j = text.find("*/", i + 2)
            if j < 0:
                err({"'*/'"}, "end of input", sl, sc)
            chunk = text[i : j + 2]
            nl = chunk.count("\n")
            if nl:
                line += nl
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            i = j + 2
            continue
        start_line, start_col = line, col
        if c == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                err({"closing '\"'"}, "end of line", start_line, start_col)
            lit = text[i + 1 : j]
            width = j + 1 - i
            toks.append(
                _Token("STRING", lit, start_line, start_col, line, start_col + width)
            )
            i = j + 1
            col += width
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            kind = "INT"
            if j < n and text[j] == ".":
                kind = "FLOAT"
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    kind = "FLOAT"
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            word = text[i:j]
            toks.append(
                _Token(kind, word, start_line, start_col, line, start_col + len(word))
            )
            col += len(word)
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(
                _Token("IDENT", word, start_line, start_col, line, start_col + len(word))
            )
            col += len(word)
            i = j
            continue
        if c in _PUNCT:
            toks.append(_Token("PUNCT", c, start_line, start_col, line, start_col + 1))
            i += 1
            col += 1
            continue
        err({"token"}, repr(c), start_line, start_col)
    toks.append(_Token("EOF", "", line, col, line, col))
    return toks


_CONSTRUCT_HEADS = ("AccD_Comp_Dist", "AccD_Dist_Select", "AccD_Update", "AccD_Iter")


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def advance(self) -> _Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def fail(self, expected) -> None:
        t = self.peek()
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise DdslSyntaxError(t.line, t.col, expected, found)

    def expect_punct(self, ch: str) -> _Token:
        t = self.peek()
        if t.kind == "PUNCT" and t.text == ch:
            return self.advance()
        self.fail({f"'{ch}'"})

    def expect_ident(self, what: str = "identifier") -> _Token:
        t = self.peek()
        if t.kind == "IDENT":
            return self.advance()
        self.fail({what})

    def expect_string(self, what: str = "quoted string") -> _Token:
        t = self.peek()
        if t.kind == "STRING":
            return self.advance()
        self.fail({what})

    def at_ident(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "IDENT" and t.text in words

    # -- grammar --------------------------------------------------------

    def parse_program(self) -> Program:
        decls = []
        if not self.at_ident("DVar", "DSet"):
            self.fail({"'DVar'", "'DSet'"})
        while self.at_ident("DVar", "DSet"):
            decls.append(self.parse_decl())
        body = []
        while self.peek().kind != "EOF":
            body.append(self.parse_construct(top_level=True))
        return Program(decls=tuple(decls), body=tuple(body))

    def parse_decl(self):
        head = self.advance()
        name = self.expect_ident("declaration name")
        dt = self.peek()
        if not (dt.kind == "IDENT" and dt.text in DTYPE_MAP):
            self.fail({"'int'", "'float'", "'double'"})
        self.advance()
        dtype = DTYPE_MAP[dt.text]
        if head.text == "DVar":
            init = None
            if self.peek().kind in ("INT", "FLOAT") or (
                self.peek().kind == "PUNCT" and self.peek().text == "-"
            ):
                init = self.parse_literal(dtype)
            semi = self.expect_punct(";")
            return VarDecl(
                name=name.text,
                dtype=dtype,
                init=init,
                span=Span(head.line, head.col, semi.end_line, semi.end_col),
            )
        size = self.parse_szref()
        dim = self.parse_szref()
        semi = self.expect_punct(";")
        return SetDecl(
            name=name.text,
            dtype=dtype,
            size=size,
            dim=dim,
            span=Span(head.line, head.col, semi.end_line, semi.end_col),
        )

    def parse_literal(self, dtype: str):
        neg = False
        if self.peek().kind == "PUNCT" and self.peek().text == "-":
            self.advance()
            neg = True
        t = self.peek()
        if t.kind == "INT":
            self.advance()
            v = int(t.text)
            value = -v if neg else v
            # Float-typed variables store float inits so printing round-trips.
            return float(value) if dtype in ("float32", "float64") else value
        if t.kind == "FLOAT":
            self.advance()
            v = float(t.text)
            return -v if neg else v
        self.fail({"numeric literal"})

    def parse_szref(self) -> SizeRef:
        t = self.peek()
        if t.kind == "IDENT":
            self.advance()
            return SizeRef(name=t.text, span=t.span())
        if t.kind == "INT":
            self.advance()
            return SizeRef(value=int(t.text), span=t.span())
        self.fail({"identifier", "integer"})

    def parse_construct(self, top_level: bool):
        t = self.peek()
        if t.kind != "IDENT":
            self.fail(set(f"'{w}'" for w in _CONSTRUCT_HEADS))
        if t.text == "AccD_Comp_Dist":
            return self.parse_compdist()
        if t.text == "AccD_Dist_Select":
            return self.parse_select()
        if t.text == "AccD_Update":
            return self.parse_update()
        if t.text == "AccD_Iter":
            if not top_level:
                self.fail(
                    set(f"'{w}'" for w in _CONSTRUCT_HEADS[:3])
                    | {"'}'"}
                )
            return self.parse_iter()
        heads = _CONSTRUCT_HEADS if top_level else _CONSTRUCT_HEADS[:3]
        self.fail(set(f"'{w}'" for w in heads))

    def _finish_stmt(self, inside_iter: bool) -> _Token | None:
        """Consume the trailing semicolon; inside an iteration block it may
        be omitted immediately before the closing brace."""
        t = self.peek()
        if inside_iter and t.kind == "PUNCT" and t.text == "}":
            return None
        return self.expect_punct(";")

    def parse_compdist(self, inside_iter: bool = False) -> ComputeDist:
        head = self.advance()
        self.expect_punct("(")
        p1 = self.expect_ident()
        self.expect_punct(",")
        p2 = self.expect_ident()
        self.expect_punct(",")
        dist_mat = self.expect_ident()
        self.expect_punct(",")
        id_mat = self.expect_ident()
        self.expect_punct(",")
        dim = self.parse_szref()
        self.expect_punct(",")
        metric = self.expect_string("metric string")
        self.expect_punct(",")
        weights = self.parse_szref()
        close = self.expect_punct(")")
        semi = self._finish_stmt(inside_iter)
        end = semi if semi is not None else close
        return ComputeDist(
            p1=p1.text,
            p2=p2.text,
            dist_mat=dist_mat.text,
            id_mat=id_mat.text,
            dim=dim,
            metric=metric.text,
            weights=weights,
            span=Span(head.line, head.col, end.end_line, end.end_col),
        )

    def parse_select(self, inside_iter: bool = False) -> DistSelect:
        head = self.advance()
        self.expect_punct("(")
        dist_mat = self.expect_ident()
        self.expect_punct(",")
        id_mat = self.expect_ident()
        self.expect_punct(",")
        rng = self.parse_szref()
        self.expect_punct(",")
        scope = self.expect_string("scope string")
        self.expect_punct(",")
        out = self.expect_ident()
        close = self.expect_punct(")")
        semi = self._finish_stmt(inside_iter)
        end = semi if semi is not None else close
        return DistSelect(
            dist_mat=dist_mat.text,
            id_mat=id_mat.text,
            rng=rng,
            scope=scope.text,
            out=out.text,
            span=Span(head.line, head.col, end.end_line, end.end_col),
        )

    def parse_update(self, inside_iter: bool = False) -> Update:
        head = self.advance()
        self.expect_punct("(")
        args = [self.expect_ident().text]
        self.expect_punct(",")
        args.append(self.expect_ident().text)
        while self.peek().kind == "PUNCT" and self.peek().text == ",":
            self.advance()
            args.append(self.expect_ident().text)
        close = self.expect_punct(")")
        semi = self._finish_stmt(inside_iter)
        end = semi if semi is not None else close
        return Update(
            args=tuple(args),
            span=Span(head.line, head.col, end.end_line, end.end_col),
        )

    def parse_iter(self) -> Iter:
        head = self.advance()
        self.expect_punct("(")
        cond = self.parse_szref()
        self.expect_punct(")")
        self.expect_punct("{")
        assigns: list[StatusAssign] = []
        body = []
        while True:
            t = self.peek()
            if t.kind == "PUNCT" and t.text == "}":
                break
            if t.kind == "EOF":
                self.fail({"'}'"})
            if t.kind == "IDENT" and t.text not in _CONSTRUCT_HEADS:
                assigns.append(self.parse_status_assign())
                continue
            stmt = self.parse_iter_stmt()
            body.append(stmt)
        close = self.expect_punct("}")
        if not body:
            raise DdslSyntaxError(
                close.line, close.col, {"at least one construct"}, "'}'"
            )
        return Iter(
            condition=cond,
            status_assigns=tuple(assigns),
            body=tuple(body),
            span=Span(head.line, head.col, close.end_line, close.end_col),
        )

    def parse_iter_stmt(self):
        t = self.peek()
        if t.text == "AccD_Comp_Dist":
            return self.parse_compdist(inside_iter=True)
        if t.text == "AccD_Dist_Select":
            return self.parse_select(inside_iter=True)
        if t.text == "AccD_Update":
            return self.parse_update(inside_iter=True)
        self.fail(set(f"'{w}'" for w in _CONSTRUCT_HEADS[:3]) | {"'}'"})

    def parse_status_assign(self) -> StatusAssign:
        name = self.expect_ident("status variable")
        self.expect_punct("=")
        t = self.peek()
        if not (t.kind == "IDENT" and t.text in ("true", "false")):
            self.fail({"'true'", "'false'"})
        self.advance()
        semi = self._finish_stmt(inside_iter=True)
        end = semi if semi is not None else t
        return StatusAssign(
            name=name.text,
            value=(t.text == "true"),
            span=Span(name.line, name.col, end.end_line, end.end_col),
        )


def parse(text: str) -> Program:
    """Parse DDSL source into a Program, or raise DdslSyntaxError."""
    return _Parser(text).parse_program()
