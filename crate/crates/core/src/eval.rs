//! Call-by-value small-step interpreter for the record calculus.

use crate::typing::Expr;

/// Result of a bounded evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Value(Expr),
    Diverged,
    Stuck(Expr),
}

/// One reduction step; `None` when `e` is a value or stuck.
pub fn step(e: &Expr) -> Option<Expr> {
    match e {
        Expr::App(f, a) => {
            if !f.is_value() {
                return step(f).map(|f2| Expr::App(Box::new(f2), a.clone()));
            }
            if !a.is_value() {
                return step(a).map(|a2| Expr::App(f.clone(), Box::new(a2)));
            }
            match f.as_ref() {
                Expr::Abs { param, body, .. } => Some(subst(body, param, a)),
                _ => None,
            }
        }
        Expr::Ext { rec, label, val } => {
            // The value position evaluates before the record position.
            if !val.is_value() {
                return step(val).map(|v2| Expr::Ext {
                    rec: rec.clone(),
                    label: label.clone(),
                    val: Box::new(v2),
                });
            }
            if !rec.is_value() {
                return step(rec).map(|r2| Expr::Ext {
                    rec: Box::new(r2),
                    label: label.clone(),
                    val: val.clone(),
                });
            }
            None
        }
        Expr::Sel { rec, label } => {
            if !rec.is_value() {
                return step(rec).map(|r2| Expr::Sel {
                    rec: Box::new(r2),
                    label: label.clone(),
                });
            }
            match rec.as_ref() {
                Expr::Ext {
                    rec: inner,
                    label: l2,
                    val,
                } => {
                    if l2 == label {
                        Some(val.as_ref().clone())
                    } else {
                        Some(Expr::Sel {
                            rec: inner.clone(),
                            label: label.clone(),
                        })
                    }
                }
                _ => None,
            }
        }
        Expr::Del { rec, label } => {
            if !rec.is_value() {
                return step(rec).map(|r2| Expr::Del {
                    rec: Box::new(r2),
                    label: label.clone(),
                });
            }
            match rec.as_ref() {
                Expr::Ext {
                    rec: inner,
                    label: l2,
                    val,
                } => {
                    if l2 == label {
                        Some(Expr::Del {
                            rec: inner.clone(),
                            label: label.clone(),
                        })
                    } else {
                        Some(Expr::Ext {
                            rec: Box::new(Expr::Del {
                                rec: inner.clone(),
                                label: label.clone(),
                            }),
                            label: l2.clone(),
                            val: val.clone(),
                        })
                    }
                }
                Expr::Empty => Some(Expr::Empty),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Iterates `step` under a fuel bound.
pub fn eval(e: &Expr, fuel: u64) -> Outcome {
    let mut cur = e.clone();
    for _ in 0..fuel {
        if cur.is_value() {
            return Outcome::Value(cur);
        }
        match step(&cur) {
            Some(next) => cur = next,
            None => return Outcome::Stuck(cur),
        }
    }
    if cur.is_value() {
        Outcome::Value(cur)
    } else {
        Outcome::Diverged
    }
}

fn free_vars(e: &Expr, acc: &mut Vec<String>) {
    match e {
        Expr::Var(x) => acc.push(x.clone()),
        Expr::App(a, b) => {
            free_vars(a, acc);
            free_vars(b, acc);
        }
        Expr::Abs { param, body, .. } => {
            let mut inner = Vec::new();
            free_vars(body, &mut inner);
            acc.extend(inner.into_iter().filter(|x| x != param));
        }
        Expr::Ext { rec, val, .. } => {
            free_vars(rec, acc);
            free_vars(val, acc);
        }
        Expr::Sel { rec, .. } | Expr::Del { rec, .. } => free_vars(rec, acc),
        _ => {}
    }
}

/// Capture-avoiding substitution of `v` for `x` in `e`.
pub fn subst(e: &Expr, x: &str, v: &Expr) -> Expr {
    match e {
        Expr::Var(y) if y == x => v.clone(),
        Expr::Var(_) | Expr::Const(_) | Expr::Empty => e.clone(),
        Expr::App(a, b) => Expr::App(Box::new(subst(a, x, v)), Box::new(subst(b, x, v))),
        Expr::Abs { annot, param, body } => {
            if param == x {
                return e.clone();
            }
            let mut fv = Vec::new();
            free_vars(v, &mut fv);
            if fv.iter().any(|y| y == param) {
                // Alpha-rename the binder away from the substituted term.
                let fresh = fresh_name(param, &fv, body);
                let renamed = subst(body, param, &Expr::Var(fresh.clone()));
                Expr::Abs {
                    annot: annot.clone(),
                    param: fresh,
                    body: Box::new(subst(&renamed, x, v)),
                }
            } else {
                Expr::Abs {
                    annot: annot.clone(),
                    param: param.clone(),
                    body: Box::new(subst(body, x, v)),
                }
            }
        }
        Expr::Ext { rec, label, val } => Expr::Ext {
            rec: Box::new(subst(rec, x, v)),
            label: label.clone(),
            val: Box::new(subst(val, x, v)),
        },
        Expr::Sel { rec, label } => Expr::Sel {
            rec: Box::new(subst(rec, x, v)),
            label: label.clone(),
        },
        Expr::Del { rec, label } => Expr::Del {
            rec: Box::new(subst(rec, x, v)),
            label: label.clone(),
        },
    }
}

fn fresh_name(base: &str, avoid: &[String], body: &Expr) -> String {
    let mut body_vars = Vec::new();
    free_vars(body, &mut body_vars);
    let mut i = 0;
    loop {
        let cand = format!("{}{}", base, i);
        if !avoid.contains(&cand) && !body_vars.contains(&cand) {
            return cand;
        }
        i += 1;
    }
}
