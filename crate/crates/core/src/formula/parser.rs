use super::ast::{BinOp, Expr, FormulaAst, Func};
use super::lexer::{tokenize, Tok, Token};
use super::{FormulaError, FormulaSource};

pub const DEFAULT_NODE_BUDGET: usize = 64;
const MAX_DEPTH: usize = 200;

pub fn parse(source: &FormulaSource, feature_names: &[String]) -> Result<FormulaAst, FormulaError> {
    parse_with_budget(&source.text, feature_names, DEFAULT_NODE_BUDGET)
}

pub fn parse_str(text: &str, feature_names: &[String]) -> Result<FormulaAst, FormulaError> {
    parse_with_budget(text, feature_names, DEFAULT_NODE_BUDGET)
}

pub fn parse_with_budget(
    text: &str,
    feature_names: &[String],
    max_nodes: usize,
) -> Result<FormulaAst, FormulaError> {
    if text.trim().is_empty() {
        return Err(FormulaError::Empty);
    }
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        at: 0,
        names: feature_names,
        depth: 0,
    };
    let expr = p.expr()?;
    let tail = p.peek();
    if tail.tok != Tok::Eof {
        return Err(FormulaError::Syntax {
            pos: tail.pos,
            message: format!("unexpected {:?} after expression", tail.tok),
        });
    }
    let count = expr.node_count();
    if count > max_nodes {
        return Err(FormulaError::NodeBudget {
            count,
            max: max_nodes,
        });
    }
    Ok(FormulaAst::new(expr))
}

struct Parser<'a> {
    tokens: Vec<Token>,
    at: usize,
    names: &'a [String],
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FormulaError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(FormulaError::Syntax {
                pos: t.pos,
                message: format!("expected {what}, found {:?}", t.tok),
            })
        }
    }

    fn enter(&mut self) -> Result<(), FormulaError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(FormulaError::Syntax {
                pos: self.peek().pos,
                message: "expression nested too deeply".into(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                self.enter()?;
                let e = self.unary()?;
                self.depth -= 1;
                Ok(Expr::Neg(Box::new(e)))
            }
            Tok::Plus => {
                self.bump();
                self.enter()?;
                let e = self.unary();
                self.depth -= 1;
                e
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    self.call(&name, t.pos)
                } else if let Some(index) = self.names.iter().position(|n| *n == name) {
                    Ok(Expr::Feature { name, index })
                } else if Func::from_name(&name).is_some() {
                    Err(FormulaError::Syntax {
                        pos: t.pos,
                        message: format!("function `{name}` used without arguments"),
                    })
                } else {
                    Err(FormulaError::UnknownFeature { pos: t.pos, name })
                }
            }
            other => Err(FormulaError::Syntax {
                pos: t.pos,
                message: match other {
                    Tok::Eof => "unexpected end of formula".to_string(),
                    o => format!("unexpected {o:?}"),
                },
            }),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Expr, FormulaError> {
        let func = Func::from_name(name).ok_or_else(|| FormulaError::Blocked {
            pos,
            construct: format!("function `{name}` is not allowed"),
        })?;
        self.bump();
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` closing call")?;
        if args.len() != func.arity() {
            return Err(FormulaError::Arity {
                func: func.name().to_string(),
                expected: func.arity(),
                got: args.len(),
            });
        }
        Ok(Expr::Call { func, args })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::lint;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn product_has_three_leaves() {
        let ast = parse_str("0.5 * NAD * spermidine", &names(&["NAD", "spermidine"])).unwrap();
        assert_eq!(ast.leaf_count(), 3);
        assert_eq!(ast.node_count(), 5);
        assert_eq!(ast.features(), vec!["NAD", "spermidine"]);
    }

    #[test]
    fn precedence_and_parens() {
        let n = names(&["a", "b", "c"]);
        assert_eq!(parse_str("a + b * c", &n).unwrap().to_string(), "a + b * c");
        assert_eq!(parse_str("(a + b) * c", &n).unwrap().to_string(), "(a + b) * c");
        assert_eq!(parse_str("a - (b - c)", &n).unwrap().to_string(), "a - (b - c)");
        assert_eq!(parse_str("a / (b * c)", &n).unwrap().to_string(), "a / (b * c)");
        assert_eq!(parse_str("-(a + b)", &n).unwrap().to_string(), "-(a + b)");
        assert_eq!(parse_str("-a * b", &n).unwrap().to_string(), "-a * b");
    }

    #[test]
    fn aliases_and_prefixes() {
        let n = names(&["x"]);
        let a = parse_str("np.maximum(x, 0) + numpy.exp(-x)", &n).unwrap();
        assert_eq!(a.to_string(), "max(x, 0) + exp(-x)");
    }

    #[test]
    fn error_kinds() {
        let n = names(&["x"]);
        assert!(matches!(parse_str("import os", &n), Err(FormulaError::Blocked { .. })));
        assert!(matches!(parse_str("sin(x)", &n), Err(FormulaError::Blocked { .. })));
        assert!(matches!(parse_str("y + 1", &n), Err(FormulaError::UnknownFeature { .. })));
        assert!(matches!(parse_str("clip(x, 0)", &n), Err(FormulaError::Arity { .. })));
        assert!(matches!(parse_str("x +", &n), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_str("x x", &n), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_str("(x", &n), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_str("  ", &n), Err(FormulaError::Empty)));
        let long = vec!["x"; 40].join(" + ");
        assert!(matches!(parse_str(&long, &n), Err(FormulaError::NodeBudget { count: 79, max: 64 })));
        let deep = format!("{}x{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse_str(&deep, &n).is_err());
    }

    #[test]
    fn feature_shadows_function_name() {
        let ast = parse_str("exp * 2", &names(&["exp"])).unwrap();
        assert_eq!(ast.features(), vec!["exp"]);
    }

    #[test]
    fn division_lint() {
        let n = names(&["fol", "x"]);
        assert!(lint(&parse_str("0.5*fol/(0.5+fol)", &n).unwrap()).is_empty());
        assert!(lint(&parse_str("x / 2", &n).unwrap()).is_empty());
        assert_eq!(lint(&parse_str("1/x", &n).unwrap()).len(), 1);
        assert_eq!(lint(&parse_str("1/(x - 0.5)", &n).unwrap()).len(), 1);
    }
}
