use super::lexer::{tokenize, Span, Token, TokenKind};
use super::{
    ATerm, Arg, ArgValue, Bar, FixedTerm, FormulaAst, GroupExpr, GroupTermRaw, NlExpr, NlFun,
    ParseError, ParseMode, ResponseSpec, Rhs, RhsSpec, SpecialFun, SpecialTerm, ATERM_FUNCTIONS,
};

pub(super) struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

enum Item {
    Number(String),
    Fixed(Vec<FixedTerm>),
    Special(SpecialTerm),
    Group(GroupTermRaw),
}

#[derive(Clone, Copy, PartialEq)]
enum Sign {
    Plus,
    Minus,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    pub(super) fn new(text: &'a str) -> PResult<Self> {
        Ok(Parser {
            text,
            tokens: tokenize(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, k: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + k).map(|t| &t.kind)
    }

    fn span_here(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => Span::new(self.text.len(), self.text.len()),
        }
    }

    fn prev_span(&self) -> Span {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map(|t| t.span)
            .unwrap_or(Span::new(0, 0))
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Some(k) => k.describe(),
            None => "end of input".to_string(),
        };
        ParseError::new(format!("{what}, found {found}"), self.span_here())
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> PResult<Span> {
        if self.at(kind) {
            Ok(self.bump().unwrap().span)
        } else {
            Err(self.error_here(what))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(TokenKind::Ident(_)) => {
                let t = self.bump().unwrap();
                match t.kind {
                    TokenKind::Ident(s) => Ok((s, t.span)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn expect_end(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(k) => Err(ParseError::new(
                format!("unexpected {}", k.describe()),
                self.span_here(),
            )),
        }
    }

    pub(super) fn formula(mut self, mode: ParseMode) -> PResult<FormulaAst> {
        let response = if self.at(&TokenKind::Tilde) {
            None
        } else {
            Some(self.lhs()?)
        };
        self.expect(&TokenKind::Tilde, "expected `~`")?;
        if self.peek().is_none() {
            return Err(self.error_here("expected a right-hand side after `~`"));
        }
        let rhs = match mode {
            ParseMode::Standard => Rhs::Terms(self.rhs_items(false)?),
            ParseMode::Nonlinear => Rhs::Nonlinear(self.nl_sum()?),
        };
        self.expect_end()?;
        Ok(FormulaAst {
            response,
            rhs,
            raw_text: self.text.to_string(),
        })
    }

    pub(super) fn nl_only(mut self) -> PResult<NlExpr> {
        let e = self.nl_sum()?;
        self.expect_end()?;
        Ok(e)
    }

    pub(super) fn rhs_only(mut self) -> PResult<RhsSpec> {
        let r = self.rhs_items(false)?;
        self.expect_end()?;
        Ok(r)
    }

    fn lhs(&mut self) -> PResult<ResponseSpec> {
        let (first, _) = self.expect_ident("expected a response variable")?;
        let mut variables = vec![first];
        while self.eat(&TokenKind::Plus) {
            let (name, span) = self.expect_ident("expected a parameter name")?;
            if variables.contains(&name) {
                return Err(ParseError::new(format!("`{name}` is repeated"), span));
            }
            variables.push(name);
        }
        let mut aterms = Vec::new();
        if self.at(&TokenKind::DoubleBar) {
            return Err(ParseError::new(
                "addition terms are introduced by a single `|`",
                self.span_here(),
            ));
        }
        if self.eat(&TokenKind::Bar) {
            let bar_span = self.prev_span();
            if variables.len() > 1 {
                return Err(ParseError::new(
                    "addition terms cannot be combined with several left-hand-side names",
                    bar_span,
                ));
            }
            loop {
                aterms.push(self.aterm()?);
                if !self.eat(&TokenKind::Plus) {
                    break;
                }
            }
        }
        Ok(ResponseSpec { variables, aterms })
    }

    fn aterm(&mut self) -> PResult<ATerm> {
        let (fun, span) = self.expect_ident("expected an addition term such as `weights(w)`")?;
        if !ATERM_FUNCTIONS.contains(&fun.as_str()) {
            return Err(ParseError::new(
                format!(
                    "unknown addition term `{fun}` (expected one of {})",
                    ATERM_FUNCTIONS.join(", ")
                ),
                span,
            ));
        }
        self.expect(&TokenKind::LParen, "expected `(`")?;
        let args = self.call_args()?;
        if args.is_empty() {
            return Err(ParseError::new(
                format!("`{fun}` needs at least one argument"),
                span.to(self.prev_span()),
            ));
        }
        Ok(ATerm { fun, args })
    }

    /// Arguments after an opening parenthesis, consuming the closing one.
    fn call_args(&mut self) -> PResult<Vec<Arg>> {
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            let name = match (self.peek(), self.peek_at(1)) {
                (Some(TokenKind::Ident(n)), Some(TokenKind::Equals)) => {
                    let n = n.clone();
                    self.pos += 2;
                    Some(n)
                }
                _ => None,
            };
            let negative = self.eat(&TokenKind::Minus);
            let value = match self.peek().cloned() {
                Some(TokenKind::Number(s)) => {
                    let span = self.bump().unwrap().span;
                    let v: f64 = s
                        .parse()
                        .map_err(|_| ParseError::new("malformed number", span))?;
                    ArgValue::Number(if negative { -v } else { v })
                }
                Some(TokenKind::Ident(s)) if !negative => {
                    let span = self.bump().unwrap().span;
                    if self.at(&TokenKind::LParen) {
                        return Err(ParseError::new(
                            "nested function calls are not supported in arguments",
                            span,
                        ));
                    }
                    ArgValue::Ident(s)
                }
                _ => return Err(self.error_here("expected an argument")),
            };
            args.push(Arg { name, value });
            if self.eat(&TokenKind::Comma) {
                continue;
            }
            self.expect(&TokenKind::RParen, "expected `,` or `)`")?;
            return Ok(args);
        }
    }

    fn rhs_items(&mut self, inner: bool) -> PResult<RhsSpec> {
        let mut spec = RhsSpec::default();
        let mut sign = Sign::Plus;
        if self.eat(&TokenKind::Minus) {
            sign = Sign::Minus;
        } else {
            self.eat(&TokenKind::Plus);
        }
        loop {
            let start = self.span_here();
            let item = self.product(inner)?;
            let span = start.to(self.prev_span());
            apply_item(&mut spec, sign, item, span, inner)?;
            if self.eat(&TokenKind::Plus) {
                sign = Sign::Plus;
            } else if self.eat(&TokenKind::Minus) {
                sign = Sign::Minus;
            } else {
                break;
            }
        }
        Ok(spec)
    }

    fn product(&mut self, inner: bool) -> PResult<Item> {
        let start = self.span_here();
        let first = self.interaction(inner)?;
        if !self.at(&TokenKind::Star) {
            return Ok(first);
        }
        let mut operands = vec![single_fixed(first, start.to(self.prev_span()))?];
        while self.eat(&TokenKind::Star) {
            let s = self.span_here();
            let next = self.interaction(inner)?;
            operands.push(single_fixed(next, s.to(self.prev_span()))?);
        }
        Ok(Item::Fixed(expand_product(&operands)))
    }

    fn interaction(&mut self, inner: bool) -> PResult<Item> {
        let start = self.span_here();
        let first = self.atom(inner)?;
        if !self.at(&TokenKind::Colon) {
            return Ok(first);
        }
        let mut vars = single_fixed(first, start.to(self.prev_span()))?.vars;
        while self.eat(&TokenKind::Colon) {
            let s = self.span_here();
            let next = self.atom(inner)?;
            for v in single_fixed(next, s.to(self.prev_span()))?.vars {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        Ok(Item::Fixed(vec![FixedTerm { vars }]))
    }

    fn atom(&mut self, inner: bool) -> PResult<Item> {
        match self.peek().cloned() {
            Some(TokenKind::Number(s)) => {
                self.bump();
                Ok(Item::Number(s))
            }
            Some(TokenKind::Ident(name)) => {
                let span = self.bump().unwrap().span;
                if !self.at(&TokenKind::LParen) {
                    return Ok(Item::Fixed(vec![FixedTerm { vars: vec![name] }]));
                }
                if let Some(fun) = SpecialFun::from_name(&name) {
                    self.bump();
                    let args = self.call_args()?;
                    let term = SpecialTerm { fun, args };
                    if term.variables().is_empty() {
                        return Err(ParseError::new(
                            format!("`{name}()` needs at least one variable"),
                            span.to(self.prev_span()),
                        ));
                    }
                    return Ok(Item::Special(term));
                }
                if name == "gr" || name == "mm" {
                    return Err(ParseError::new(
                        format!("`{name}(...)` is only allowed as the grouping part after `|`"),
                        span,
                    ));
                }
                Err(ParseError::new(
                    format!(
                        "function `{name}` is not supported in population-level terms; \
                         transform the data column instead"
                    ),
                    span,
                ))
            }
            Some(TokenKind::LParen) => {
                let open = self.bump().unwrap().span;
                if inner {
                    return Err(ParseError::new("group-level terms cannot be nested", open));
                }
                self.group_term(open).map(Item::Group)
            }
            _ => Err(self.error_here("expected a term")),
        }
    }

    fn group_term(&mut self, open: Span) -> PResult<GroupTermRaw> {
        let inner = self.rhs_items(true)?;
        let (bar, id) = match self.peek() {
            Some(TokenKind::Bar) => {
                self.bump();
                let id = match (self.peek().cloned(), self.peek_at(1)) {
                    (Some(TokenKind::Ident(s)), Some(TokenKind::Bar))
                    | (Some(TokenKind::Number(s)), Some(TokenKind::Bar)) => {
                        self.pos += 2;
                        Some(s)
                    }
                    _ => None,
                };
                (Bar::Correlated, id)
            }
            Some(TokenKind::DoubleBar) => {
                let dbl = self.bump().unwrap().span;
                if let (Some(TokenKind::Ident(_) | TokenKind::Number(_)), Some(TokenKind::Bar)) =
                    (self.peek(), self.peek_at(1))
                {
                    let end = self.tokens[self.pos + 1].span;
                    return Err(ParseError::new(
                        "`|ID|` cannot be combined with `||`",
                        dbl.to(end),
                    ));
                }
                (Bar::Uncorrelated, None)
            }
            Some(TokenKind::RParen) => {
                return Err(ParseError::new(
                    "parentheses in population-level terms are only supported for group-level terms `(... | g)`",
                    open.to(self.span_here()),
                ))
            }
            _ => return Err(self.error_here("expected `|` or `||`")),
        };
        let group = self.group_sum()?;
        self.expect(
            &TokenKind::RParen,
            "expected `)` closing the group-level term",
        )?;
        Ok(GroupTermRaw {
            inner,
            bar,
            id,
            group,
        })
    }

    fn group_sum(&mut self) -> PResult<GroupExpr> {
        let mut lhs = self.group_slash()?;
        while self.eat(&TokenKind::Plus) {
            let rhs = self.group_slash()?;
            lhs = GroupExpr::Plus(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn group_slash(&mut self) -> PResult<GroupExpr> {
        let mut lhs = self.group_colon()?;
        while self.eat(&TokenKind::Slash) {
            let rhs = self.group_colon()?;
            lhs = GroupExpr::Slash(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn group_colon(&mut self) -> PResult<GroupExpr> {
        let mut lhs = self.group_atom()?;
        while self.eat(&TokenKind::Colon) {
            let rhs = self.group_atom()?;
            lhs = GroupExpr::Colon(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn group_atom(&mut self) -> PResult<GroupExpr> {
        match self.peek().cloned() {
            Some(TokenKind::Ident(name)) => {
                let span = self.bump().unwrap().span;
                if !self.at(&TokenKind::LParen) {
                    return Ok(GroupExpr::Var(name));
                }
                self.bump();
                match name.as_str() {
                    "gr" => {
                        let inner = self.group_sum()?;
                        self.expect(&TokenKind::RParen, "expected `)` closing `gr(`")?;
                        Ok(GroupExpr::Gr(Box::new(inner)))
                    }
                    "mm" => self.mm_call(span),
                    _ => Err(ParseError::new(
                        format!("unknown grouping function `{name}` (expected `gr` or `mm`)"),
                        span,
                    )),
                }
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let inner = self.group_sum()?;
                self.expect(&TokenKind::RParen, "expected `)`")?;
                Ok(inner)
            }
            _ => Err(self.error_here("expected a grouping variable")),
        }
    }

    fn mm_call(&mut self, name_span: Span) -> PResult<GroupExpr> {
        let mut members = Vec::new();
        let mut weights = None;
        loop {
            if let (Some(TokenKind::Ident(k)), Some(TokenKind::Equals)) =
                (self.peek(), self.peek_at(1))
            {
                if k != "weights" {
                    return Err(ParseError::new(
                        format!("unknown `mm` argument `{k}`"),
                        self.span_here(),
                    ));
                }
                self.pos += 2;
                let (cb, cb_span) = self.expect_ident("expected `cbind(...)`")?;
                if cb != "cbind" {
                    return Err(ParseError::new("expected `cbind(...)`", cb_span));
                }
                self.expect(&TokenKind::LParen, "expected `(`")?;
                let mut w = Vec::new();
                loop {
                    w.push(self.expect_ident("expected a weight variable")?.0);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                self.expect(&TokenKind::RParen, "expected `)` closing `cbind(`")?;
                weights = Some(w);
            } else {
                members.push(self.expect_ident("expected a grouping variable")?.0);
            }
            if self.eat(&TokenKind::Comma) {
                if weights.is_some() {
                    return Err(self.error_here("`weights` must be the last `mm` argument"));
                }
                continue;
            }
            self.expect(&TokenKind::RParen, "expected `,` or `)`")?;
            break;
        }
        let span = name_span.to(self.prev_span());
        if members.len() < 2 {
            return Err(ParseError::new(
                "`mm` needs at least two grouping variables",
                span,
            ));
        }
        if let Some(w) = &weights {
            if w.len() != members.len() {
                return Err(ParseError::new(
                    format!(
                        "`mm` has {} members but {} weight columns",
                        members.len(),
                        w.len()
                    ),
                    span,
                ));
            }
        }
        Ok(GroupExpr::Mm { members, weights })
    }

    fn nl_sum(&mut self) -> PResult<NlExpr> {
        let mut lhs = self.nl_product()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                lhs = NlExpr::Add(Box::new(lhs), Box::new(self.nl_product()?));
            } else if self.eat(&TokenKind::Minus) {
                lhs = NlExpr::Sub(Box::new(lhs), Box::new(self.nl_product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn nl_product(&mut self) -> PResult<NlExpr> {
        let mut lhs = self.nl_unary()?;
        loop {
            if self.eat(&TokenKind::Star) {
                lhs = NlExpr::Mul(Box::new(lhs), Box::new(self.nl_unary()?));
            } else if self.eat(&TokenKind::Slash) {
                lhs = NlExpr::Div(Box::new(lhs), Box::new(self.nl_unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn nl_unary(&mut self) -> PResult<NlExpr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(NlExpr::Neg(Box::new(self.nl_unary()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.nl_unary();
        }
        self.nl_power()
    }

    fn nl_power(&mut self) -> PResult<NlExpr> {
        let base = self.nl_primary()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.nl_exponent()?;
            return Ok(NlExpr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn nl_exponent(&mut self) -> PResult<NlExpr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(NlExpr::Neg(Box::new(self.nl_exponent()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.nl_exponent();
        }
        self.nl_power()
    }

    fn nl_primary(&mut self) -> PResult<NlExpr> {
        match self.peek().cloned() {
            Some(TokenKind::Number(s)) => {
                let span = self.bump().unwrap().span;
                s.parse()
                    .map(NlExpr::Literal)
                    .map_err(|_| ParseError::new("malformed number", span))
            }
            Some(TokenKind::Ident(name)) => {
                let span = self.bump().unwrap().span;
                if !self.at(&TokenKind::LParen) {
                    return Ok(NlExpr::Ident(name));
                }
                let fun = match name.as_str() {
                    "exp" => NlFun::Exp,
                    "log" => NlFun::Log,
                    _ => {
                        return Err(ParseError::new(
                            format!("unknown function `{name}` (only `exp` and `log` are allowed)"),
                            span,
                        ))
                    }
                };
                self.bump();
                if self.at(&TokenKind::RParen) {
                    return Err(ParseError::new(
                        format!("`{name}` takes exactly one argument"),
                        span.to(self.span_here()),
                    ));
                }
                let arg = self.nl_sum()?;
                if self.at(&TokenKind::Comma) {
                    return Err(ParseError::new(
                        format!("`{name}` takes exactly one argument"),
                        span.to(self.span_here()),
                    ));
                }
                self.expect(&TokenKind::RParen, "expected `)`")?;
                Ok(NlExpr::Call(fun, Box::new(arg)))
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let e = self.nl_sum()?;
                self.expect(&TokenKind::RParen, "expected `)`")?;
                Ok(e)
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }
}

fn single_fixed(item: Item, span: Span) -> PResult<FixedTerm> {
    match item {
        Item::Fixed(mut terms) if terms.len() == 1 => Ok(terms.remove(0)),
        Item::Fixed(_) => Err(ParseError::new(
            "nested products are not supported here",
            span,
        )),
        Item::Number(_) => Err(ParseError::new(
            "numbers are only allowed as intercept markers `0` or `1`",
            span,
        )),
        Item::Special(_) | Item::Group(_) => Err(ParseError::new(
            "`:` and `*` can only combine plain variables",
            span,
        )),
    }
}

/// `a*b*c` -> main effects, then two-way, then three-way interactions.
fn expand_product(operands: &[FixedTerm]) -> Vec<FixedTerm> {
    let n = operands.len();
    let mut out: Vec<FixedTerm> = Vec::new();
    for size in 1..=n {
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut vars = Vec::new();
            for (i, op) in operands.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for v in &op.vars {
                        if !vars.contains(v) {
                            vars.push(v.clone());
                        }
                    }
                }
            }
            let term = FixedTerm { vars };
            if !out.contains(&term) {
                out.push(term);
            }
        }
    }
    out
}

fn apply_item(spec: &mut RhsSpec, sign: Sign, item: Item, span: Span, inner: bool) -> PResult<()> {
    match item {
        Item::Number(s) => match (s.as_str(), sign) {
            ("1", Sign::Plus) | ("0", Sign::Minus) => spec.intercept = true,
            ("0", Sign::Plus) | ("1", Sign::Minus) => spec.intercept = false,
            _ => {
                return Err(ParseError::new(
                    format!(
                        "numeric literal `{s}` is only allowed as an intercept marker (0 or 1)"
                    ),
                    span,
                ))
            }
        },
        _ if sign == Sign::Minus => {
            return Err(ParseError::new(
                "removing terms other than the intercept is not supported",
                span,
            ))
        }
        Item::Fixed(terms) => {
            for t in terms {
                if !spec.fixed_terms.contains(&t) {
                    spec.fixed_terms.push(t);
                }
            }
        }
        Item::Special(t) => {
            if inner {
                return Err(ParseError::new(
                    "special terms are not allowed inside group-level terms",
                    span,
                ));
            }
            spec.special_terms.push(t);
        }
        Item::Group(g) => spec.group_terms.push(g),
    }
    Ok(())
}
