use thiserror::Error;

use super::lexer::{tokenize, Spanned, Tok};
use super::{
    ArithOp, Atom, ChoiceRule, CompOp, Comparison, DefineRule, Fact, Literal, Program, Rule, Term,
    TestRule,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parses a program of the fragment. `%` comments run to end of line.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut rules = Vec::new();
    while p.peek() != &Tok::Eof {
        rules.push(p.rule()?);
    }
    Ok(Program { rules })
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        let s = &self.tokens[self.pos];
        SyntaxError {
            line: s.line,
            column: s.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        let found = self.peek();
        let mut msg = format!("expected {expected}, found {}", found.describe());
        if let Tok::Ident(w) = found {
            if w == "and" || w == "or" {
                msg.push_str("; conjunctions are written with `,`");
            }
        }
        self.error_here(msg)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn rule(&mut self) -> PResult<Rule> {
        match self.peek() {
            Tok::LBrace => self.braced_rule(),
            Tok::Ident(_) => self.atom_headed_rule(),
            _ => {
                let heads = self.comparison_list()?;
                let body = self.optional_body()?;
                Ok(Rule::Test(TestRule {
                    heads,
                    cardinality: None,
                    body,
                }))
            }
        }
    }

    fn braced_rule(&mut self) -> PResult<Rule> {
        self.expect(Tok::LBrace, "`{`")?;
        let is_choice = matches!(self.peek(), Tok::Ident(_));
        if is_choice {
            let head = self.atom()?;
            let mut conditions = Vec::new();
            if *self.peek() == Tok::Colon {
                self.advance();
                conditions.push(self.atom()?);
                while *self.peek() == Tok::Comma {
                    self.advance();
                    conditions.push(self.atom()?);
                }
            }
            self.expect(Tok::RBrace, "`}` closing the choice")?;
            let cardinality = self.cardinality()?;
            let body = self.optional_body()?;
            Ok(Rule::Choice(ChoiceRule {
                head,
                conditions,
                cardinality,
                body,
            }))
        } else {
            let heads = self.comparison_list()?;
            self.expect(Tok::RBrace, "`}` closing the comparison set")?;
            let cardinality = self.cardinality()?;
            let body = self.optional_body()?;
            Ok(Rule::Test(TestRule {
                heads,
                cardinality: Some(cardinality),
                body,
            }))
        }
    }

    fn cardinality(&mut self) -> PResult<u32> {
        if *self.peek() != Tok::Eq {
            return Err(self.unexpected("`=k` after `}` (only exact cardinalities are supported)"));
        }
        self.advance();
        match self.peek().clone() {
            Tok::Int(k) if (0..=u32::MAX as i128).contains(&k) => {
                self.advance();
                Ok(k as u32)
            }
            _ => Err(self.unexpected("a non-negative integer cardinality")),
        }
    }

    fn atom_headed_rule(&mut self) -> PResult<Rule> {
        let start = self.pos;
        let (predicate, pools) = self.pooled_atom()?;
        match self.peek() {
            Tok::Dot => {
                self.advance();
                Ok(Rule::Fact(Fact { predicate, pools }))
            }
            Tok::If => {
                if pools.iter().any(|p| p.len() > 1) {
                    self.pos = start;
                    return Err(self.error_here("pools are only supported in facts"));
                }
                let head = Atom {
                    predicate,
                    args: pools.into_iter().map(|mut p| p.remove(0)).collect(),
                };
                let body = self.optional_body()?;
                Ok(Rule::Define(DefineRule { head, body }))
            }
            _ => Err(self.unexpected("`.` or `:-` after an atom head")),
        }
    }

    fn optional_body(&mut self) -> PResult<Vec<Literal>> {
        let mut body = Vec::new();
        if *self.peek() == Tok::If {
            self.advance();
            body.push(self.literal()?);
            while *self.peek() == Tok::Comma {
                self.advance();
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Dot, "`,` or `.`")?;
        Ok(body)
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek() {
            Tok::Ident(_) => Ok(Literal::Atom(self.atom()?)),
            _ => Ok(Literal::Comparison(self.comparison()?)),
        }
    }

    fn comparison_list(&mut self) -> PResult<Vec<Comparison>> {
        let mut out = vec![self.comparison()?];
        while *self.peek() == Tok::Semi {
            self.advance();
            out.push(self.comparison()?);
        }
        Ok(out)
    }

    fn comparison(&mut self) -> PResult<Comparison> {
        let start = self.pos;
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Eq => CompOp::Eq,
            Tok::Ne => CompOp::Ne,
            Tok::Lt => CompOp::Lt,
            Tok::Le => CompOp::Le,
            Tok::Gt => CompOp::Gt,
            Tok::Ge => CompOp::Ge,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.advance();
        let rhs = self.operand()?;
        let (lt, rt) = (matches!(lhs, Term::Tuple(_)), matches!(rhs, Term::Tuple(_)));
        if lt || rt {
            let bad = match (&lhs, &rhs) {
                (Term::Tuple(a), Term::Tuple(b)) => a.len() != b.len() || op.is_ordering(),
                _ => true,
            };
            if bad {
                self.pos = start;
                return Err(self.error_here(
                    "tuples compare only with `=` or `!=` against a tuple of the same length",
                ));
            }
        }
        Ok(Comparison { lhs, op, rhs })
    }

    fn atom(&mut self) -> PResult<Atom> {
        let start = self.pos;
        let (predicate, pools) = self.pooled_atom()?;
        if pools.iter().any(|p| p.len() > 1) {
            self.pos = start;
            return Err(self.error_here("pools are only supported in facts"));
        }
        Ok(Atom {
            predicate,
            args: pools.into_iter().map(|mut p| p.remove(0)).collect(),
        })
    }

    fn pooled_atom(&mut self) -> PResult<(String, Vec<Vec<Term>>)> {
        let predicate = match self.advance() {
            Tok::Ident(name) => name,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a predicate name"));
            }
        };
        let mut pools = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            loop {
                let mut pool = vec![self.argument()?];
                while *self.peek() == Tok::Semi {
                    self.advance();
                    pool.push(self.argument()?);
                }
                pools.push(pool);
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RParen => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.unexpected("`,`, `;` or `)` in argument list")),
                }
            }
        }
        Ok((predicate, pools))
    }

    fn argument(&mut self) -> PResult<Term> {
        let start = self.pos;
        let t = self.expr()?;
        if contains_tuple(&t) {
            self.pos = start;
            return Err(self.error_here("tuples are only allowed as comparison operands"));
        }
        Ok(t)
    }

    /// A comparison operand: an arithmetic term, or a tuple as a whole.
    fn operand(&mut self) -> PResult<Term> {
        let start = self.pos;
        let t = self.expr()?;
        let nested = match &t {
            Term::Tuple(elems) => elems.iter().any(contains_tuple),
            other => contains_tuple(other),
        };
        if nested {
            self.pos = start;
            return Err(self.error_here("tuples are only allowed as a whole comparison operand"));
        }
        Ok(t)
    }

    fn expr(&mut self) -> PResult<Term> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Term::arith(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> PResult<Term> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                Tok::Backslash => ArithOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Term::arith(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Term> {
        if *self.peek() != Tok::Minus {
            return self.primary();
        }
        self.advance();
        if let Tok::Int(i) = *self.peek() {
            self.advance();
            return Ok(Term::Int((-i) as i64));
        }
        let inner = self.unary()?;
        Ok(Term::arith(ArithOp::Sub, Term::Int(0), inner))
    }

    fn primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(i) => {
                if i > i64::MAX as i128 {
                    return Err(self.error_here(format!("integer `{i}` out of range")));
                }
                self.advance();
                Ok(Term::Int(i as i64))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Term::Str(s))
            }
            Tok::Var(v) => {
                self.advance();
                Ok(Term::Var(v))
            }
            Tok::Bar => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::Bar, "`|` closing the absolute value")?;
                Ok(Term::Abs(Box::new(inner)))
            }
            Tok::LParen => {
                self.advance();
                let first = self.expr()?;
                if *self.peek() == Tok::Comma {
                    let mut elems = vec![first];
                    while *self.peek() == Tok::Comma {
                        self.advance();
                        elems.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)` closing the tuple")?;
                    Ok(Term::Tuple(elems))
                } else {
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(first)
                }
            }
            Tok::Ident(name) if *self.peek2() != Tok::LParen => Err(self.error_here(format!(
                "symbolic constant `{name}` is outside the fragment; quote it as \"{name}\""
            ))),
            _ => Err(self.unexpected("a term")),
        }
    }
}

fn contains_tuple(t: &Term) -> bool {
    match t {
        Term::Tuple(_) => true,
        Term::Arith(_, l, r) => contains_tuple(l) || contains_tuple(r),
        Term::Abs(t) => contains_tuple(t),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_empty_program() {
        assert_eq!(parse_program("").unwrap(), Program::default());
        assert_eq!(
            parse_program("  % only a comment\n\n").unwrap(),
            Program::default()
        );
    }

    #[test]
    fn pooled_fact() {
        let p = parse_program(r#"employee("Bonita"; "Yvette"; "Tabitha")."#).unwrap();
        assert_eq!(
            p.rules,
            vec![Rule::Fact(Fact {
                predicate: "employee".into(),
                pools: vec![vec![
                    Term::str("Bonita"),
                    Term::str("Yvette"),
                    Term::str("Tabitha")
                ]],
            })]
        );
    }

    #[test]
    fn choice_rule_with_conditions() {
        let p =
            parse_program("{match(E, P, W): price(P), wood_type(W)}=1 :- employee(E).").unwrap();
        let Rule::Choice(c) = &p.rules[0] else {
            panic!("expected choice rule")
        };
        assert_eq!(c.cardinality, 1);
        assert_eq!(c.head.to_string(), "match(E,P,W)");
        let conds: Vec<_> = c.conditions.iter().map(ToString::to_string).collect();
        assert_eq!(conds, ["price(P)", "wood_type(W)"]);
        assert_eq!(
            c.body,
            vec![Literal::Atom(Atom::new("employee", vec![Term::var("E")]))]
        );
    }

    #[test]
    fn counted_test_rule_with_tuple_inequality() {
        let src =
            "{E1=E2; P1=P2; W1=W2}=0 :- match(E1,P1,W1), match(E2,P2,W2), (E1,P1,W1)!=(E2,P2,W2).";
        let p = parse_program(src).unwrap();
        let Rule::Test(t) = &p.rules[0] else {
            panic!("expected test rule")
        };
        assert_eq!(t.heads.len(), 3);
        assert_eq!(t.cardinality, Some(0));
        assert_eq!(t.body.len(), 3);
        let Literal::Comparison(c) = &t.body[2] else {
            panic!()
        };
        assert_eq!(c.op, CompOp::Ne);
        assert!(matches!(&c.lhs, Term::Tuple(e) if e.len() == 3));
    }

    #[test]
    fn arithmetic_precedence_and_abs() {
        let p = parse_program("{N1=N2}=0 :- a(X), |X-1|+2*X\\3=3.").unwrap();
        let Rule::Test(t) = &p.rules[0] else { panic!() };
        let Literal::Comparison(c) = &t.body[1] else {
            panic!()
        };
        assert_eq!(
            c.lhs,
            Term::arith(
                ArithOp::Add,
                Term::Abs(Box::new(Term::arith(
                    ArithOp::Sub,
                    Term::var("X"),
                    Term::Int(1)
                ))),
                Term::arith(
                    ArithOp::Rem,
                    Term::arith(ArithOp::Mul, Term::Int(2), Term::var("X")),
                    Term::Int(3)
                )
            )
        );
    }

    #[test]
    fn grouping_parentheses_are_not_tuples() {
        let p = parse_program("X=Y :- a(X), a(Y), ((X-1)/3,(Y-1)/3)=(0,0).").unwrap();
        let Rule::Test(t) = &p.rules[0] else { panic!() };
        let Literal::Comparison(c) = &t.body[2] else {
            panic!()
        };
        let Term::Tuple(elems) = &c.lhs else { panic!() };
        assert_eq!(elems[0].to_string(), "(X-1)/3");
    }

    #[test]
    fn negative_literals() {
        let p = parse_program("p(-3; 4).").unwrap();
        let Rule::Fact(f) = &p.rules[0] else { panic!() };
        assert_eq!(f.pools[0][0], Term::Int(-3));
        let p = parse_program("p(-9223372036854775808).").unwrap();
        let Rule::Fact(f) = &p.rules[0] else { panic!() };
        assert_eq!(f.pools[0][0], Term::Int(i64::MIN));
    }

    #[test]
    fn rejects_and_conjunction() {
        let src =
            "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), Ir1/3=Ir2/3 and Ic1/3=Ic2/3.";
        let e = parse_program(src).unwrap_err();
        assert!(e.message.contains("`,`"), "{e}");
        let parenthesised =
            "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), (Ir1/3=Ir2/3) and (Ic1/3=Ic2/3).";
        assert!(parse_program(parenthesised).is_err());
    }

    #[test]
    fn rejects_headless_constraint_and_negation() {
        assert!(parse_program(":- p(X).").is_err());
        assert!(parse_program("p(X) :- q(X), not r(X).").is_err());
        assert!(parse_program("p :- q.").is_ok());
        assert!(parse_program("1{p(X): q(X)}1.").is_err());
        assert!(parse_program("{p(X): q(X)} :- r.").is_err());
    }

    #[test]
    fn rejects_misplaced_tuples() {
        assert!(parse_program("X<Y :- a(X), a(Y), (X,Y)<(1,2).").is_err());
        assert!(parse_program("X=Y :- a(X), a(Y), (X,Y)=(1,2,3).").is_err());
        assert!(parse_program("X=Y :- a(X), a(Y), (X,Y)=3.").is_err());
        assert!(parse_program("p((1,2)).").is_err());
        assert!(parse_program("X=Y :- a(X), a(Y), |(X,Y)|=(1,2).").is_err());
    }

    #[test]
    fn rejects_symbolic_constants() {
        let e = parse_program("W=ash :- wood(W).").unwrap_err();
        assert!(e.message.contains("\"ash\""));
    }

    #[test]
    fn missing_dot_is_an_error() {
        let e = parse_program("p(1)\np(2).").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn pools_outside_facts_are_rejected() {
        assert!(parse_program("p(1;2) :- q(1).").is_err());
        assert!(parse_program("X=1 :- q(1;2), r(X).").is_err());
    }
}
