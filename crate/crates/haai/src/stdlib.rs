//! Primitive reactors and the prelude of named reactors.
//!
//! Primitives are pure value transformers: no mutation, no observable
//! effects, output determined by inputs alone. `string-append` and
//! `substring` are the only non-constant-time entries; everything else is
//! O(1) in its inputs.

use std::rc::Rc;

use crate::engine::Engine;
use crate::value::{IoKind, IoSpec, PrimError, PrimitiveSpec, Value};

/// Named reactors available to every program.
pub const PRELUDE: &str = "\
(defr (pre s init | (acc init)) (out acc | s))

(defr (min-max s | (i s) (a s))
  (def mi (smallest s i))
  (def ma (largest s a))
  (out mi ma | mi ma))

(defr (to-celsius k) (- k 273.15))

(defr (to-fahrenheit k) (+ (* (- k 273.15) (/ 9 5)) 32))
";

/// Build an engine with all primitives, io reactors, and the prelude loaded.
pub fn new_engine() -> Engine {
    let mut engine = Engine::new();
    install(&mut engine);
    engine
}

pub fn install(engine: &mut Engine) {
    for spec in primitive_specs() {
        engine.register_primitive(spec);
    }
    for spec in io_specs() {
        engine.register_io(spec);
    }
    let program = crate::syntax::parse_program(
        &crate::syntax::read_data("<prelude>", PRELUDE).expect("prelude reads"),
    )
    .expect("prelude parses");
    engine.load_program(&program);
}

pub fn io_specs() -> Vec<IoSpec> {
    vec![
        IoSpec {
            name: "ws-in",
            kind: IoKind::WsIn,
        },
        IoSpec {
            name: "ws-out",
            kind: IoKind::WsOut,
        },
        IoSpec {
            name: "timer",
            kind: IoKind::Timer,
        },
        IoSpec {
            name: "stdin-lines",
            kind: IoKind::StdinLines,
        },
        IoSpec {
            name: "manual-in",
            kind: IoKind::ManualIn,
        },
    ]
}

// ----- numeric helpers -----------------------------------------------------

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

fn num(v: &Value, who: &str) -> Result<Num, PrimError> {
    match v {
        Value::Int(i) => Ok(Num::I(*i)),
        Value::Float(f) => Ok(Num::F(*f)),
        other => Err(PrimError(format!(
            "{who}: expected a number, got {other}"
        ))),
    }
}

impl Num {
    fn to_value(self) -> Value {
        match self {
            Num::I(i) => Value::Int(i),
            Num::F(f) => Value::Float(f),
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(f) => f,
        }
    }
}

fn fold_arith(
    args: &[Value],
    who: &str,
    int_op: fn(i64, i64) -> Option<i64>,
    float_op: fn(f64, f64) -> f64,
) -> Result<Value, PrimError> {
    let mut acc = num(&args[0], who)?;
    for v in &args[1..] {
        let rhs = num(v, who)?;
        acc = match (acc, rhs) {
            (Num::I(a), Num::I(b)) => match int_op(a, b) {
                Some(r) => Num::I(r),
                None => return Err(PrimError(format!("{who}: integer overflow"))),
            },
            (a, b) => Num::F(float_op(a.as_f64(), b.as_f64())),
        };
    }
    Ok(acc.to_value())
}

fn prim_add(args: &[Value]) -> Result<Value, PrimError> {
    fold_arith(args, "+", i64::checked_add, |a, b| a + b)
}

fn prim_sub(args: &[Value]) -> Result<Value, PrimError> {
    fold_arith(args, "-", i64::checked_sub, |a, b| a - b)
}

fn prim_mul(args: &[Value]) -> Result<Value, PrimError> {
    fold_arith(args, "*", i64::checked_mul, |a, b| a * b)
}

/// Division stays integral when every step divides evenly.
fn prim_div(args: &[Value]) -> Result<Value, PrimError> {
    let mut acc = num(&args[0], "/")?;
    for v in &args[1..] {
        let rhs = num(v, "/")?;
        let zero = match rhs {
            Num::I(i) => i == 0,
            Num::F(f) => f == 0.0,
        };
        if zero {
            return Err(PrimError("/: division by zero".to_string()));
        }
        acc = match (acc, rhs) {
            (Num::I(a), Num::I(b)) if a % b == 0 => Num::I(a / b),
            (a, b) => Num::F(a.as_f64() / b.as_f64()),
        };
    }
    Ok(acc.to_value())
}

fn fold_compare(
    args: &[Value],
    who: &str,
    cmp: fn(f64, f64) -> bool,
) -> Result<Value, PrimError> {
    for pair in args.windows(2) {
        let a = num(&pair[0], who)?.as_f64();
        let b = num(&pair[1], who)?.as_f64();
        if !cmp(a, b) {
            return Ok(Value::Bool(false));
        }
    }
    Ok(Value::Bool(true))
}

fn prim_lt(args: &[Value]) -> Result<Value, PrimError> {
    fold_compare(args, "<", |a, b| a < b)
}

fn prim_le(args: &[Value]) -> Result<Value, PrimError> {
    fold_compare(args, "<=", |a, b| a <= b)
}

fn prim_gt(args: &[Value]) -> Result<Value, PrimError> {
    fold_compare(args, ">", |a, b| a > b)
}

fn prim_ge(args: &[Value]) -> Result<Value, PrimError> {
    fold_compare(args, ">=", |a, b| a >= b)
}

/// Numbers compare numerically across int/float; other values compare
/// structurally.
fn prim_eq(args: &[Value]) -> Result<Value, PrimError> {
    for pair in args.windows(2) {
        let equal = match (num(&pair[0], "="), num(&pair[1], "=")) {
            (Ok(a), Ok(b)) => a.as_f64() == b.as_f64(),
            _ => pair[0] == pair[1],
        };
        if !equal {
            return Ok(Value::Bool(false));
        }
    }
    Ok(Value::Bool(true))
}

fn int_arg(v: &Value, who: &str) -> Result<i64, PrimError> {
    match v {
        Value::Int(i) => Ok(*i),
        other => Err(PrimError(format!("{who}: expected an integer, got {other}"))),
    }
}

fn prim_even(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(int_arg(&args[0], "even?")? % 2 == 0))
}

fn prim_odd(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(int_arg(&args[0], "odd?")? % 2 != 0))
}

fn prim_negative(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(num(&args[0], "negative?")?.as_f64() < 0.0))
}

fn prim_positive(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(num(&args[0], "positive?")?.as_f64() > 0.0))
}

fn prim_zero(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(num(&args[0], "zero?")?.as_f64() == 0.0))
}

fn prim_number_p(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(matches!(
        args[0],
        Value::Int(_) | Value::Float(_)
    )))
}

fn prim_boolean_p(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(matches!(args[0], Value::Bool(_))))
}

fn prim_string_p(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(matches!(args[0], Value::Str(_))))
}

fn prim_pair_p(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(matches!(args[0], Value::Pair(_))))
}

fn prim_not(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Bool(!args[0].is_truthy()))
}

fn prim_cons(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Pair(Rc::new((args[0].clone(), args[1].clone()))))
}

fn prim_car(args: &[Value]) -> Result<Value, PrimError> {
    match &args[0] {
        Value::Pair(p) => Ok(p.0.clone()),
        other => Err(PrimError(format!("car: expected a pair, got {other}"))),
    }
}

fn prim_cdr(args: &[Value]) -> Result<Value, PrimError> {
    match &args[0] {
        Value::Pair(p) => Ok(p.1.clone()),
        other => Err(PrimError(format!("cdr: expected a pair, got {other}"))),
    }
}

fn prim_vector_ref(args: &[Value]) -> Result<Value, PrimError> {
    let v = match &args[0] {
        Value::Vector(v) => v,
        other => {
            return Err(PrimError(format!(
                "vector-ref: expected a vector, got {other}"
            )))
        }
    };
    let i = int_arg(&args[1], "vector-ref")?;
    if i < 0 || i as usize >= v.len() {
        return Err(PrimError(format!(
            "vector-ref: index {i} out of range for length {}",
            v.len()
        )));
    }
    Ok(v[i as usize].clone())
}

fn prim_vector_length(args: &[Value]) -> Result<Value, PrimError> {
    match &args[0] {
        Value::Vector(v) => Ok(Value::Int(v.len() as i64)),
        other => Err(PrimError(format!(
            "vector-length: expected a vector, got {other}"
        ))),
    }
}

fn prim_make_vector(args: &[Value]) -> Result<Value, PrimError> {
    let n = int_arg(&args[0], "make-vector")?;
    if n < 0 {
        return Err(PrimError(format!("make-vector: negative length {n}")));
    }
    let fill = args.get(1).cloned().unwrap_or(Value::Int(0));
    Ok(Value::Vector(Rc::from(vec![fill; n as usize])))
}

fn str_arg<'a>(v: &'a Value, who: &str) -> Result<&'a str, PrimError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(PrimError(format!("{who}: expected a string, got {other}"))),
    }
}

fn prim_string_length(args: &[Value]) -> Result<Value, PrimError> {
    Ok(Value::Int(
        str_arg(&args[0], "string-length")?.chars().count() as i64,
    ))
}

fn prim_string_append(args: &[Value]) -> Result<Value, PrimError> {
    let mut out = String::new();
    for a in args {
        out.push_str(str_arg(a, "string-append")?);
    }
    Ok(Value::string(&out))
}

fn prim_substring(args: &[Value]) -> Result<Value, PrimError> {
    let s = str_arg(&args[0], "substring")?;
    let start = int_arg(&args[1], "substring")?;
    let end = int_arg(&args[2], "substring")?;
    let chars: Vec<char> = s.chars().collect();
    if start < 0 || end < start || end as usize > chars.len() {
        return Err(PrimError(format!(
            "substring: range {start}..{end} out of bounds for length {}",
            chars.len()
        )));
    }
    Ok(Value::string(
        &chars[start as usize..end as usize].iter().collect::<String>(),
    ))
}

fn prim_smallest(args: &[Value]) -> Result<Value, PrimError> {
    let a = num(&args[0], "smallest")?;
    let b = num(&args[1], "smallest")?;
    Ok(if b.as_f64() < a.as_f64() {
        args[1].clone()
    } else {
        args[0].clone()
    })
}

fn prim_largest(args: &[Value]) -> Result<Value, PrimError> {
    let a = num(&args[0], "largest")?;
    let b = num(&args[1], "largest")?;
    Ok(if b.as_f64() > a.as_f64() {
        args[1].clone()
    } else {
        args[0].clone()
    })
}

pub fn primitive_specs() -> Vec<PrimitiveSpec> {
    fn spec(
        name: &'static str,
        min: usize,
        max: Option<usize>,
        constant_time: bool,
        apply: fn(&[Value]) -> Result<Value, PrimError>,
    ) -> PrimitiveSpec {
        PrimitiveSpec {
            name,
            min_arity: min,
            max_arity: max,
            constant_time,
            apply,
        }
    }
    vec![
        spec("+", 2, None, true, prim_add),
        spec("-", 2, None, true, prim_sub),
        spec("*", 2, None, true, prim_mul),
        spec("/", 2, None, true, prim_div),
        spec("<", 2, None, true, prim_lt),
        spec("<=", 2, None, true, prim_le),
        spec(">", 2, None, true, prim_gt),
        spec(">=", 2, None, true, prim_ge),
        spec("=", 2, None, true, prim_eq),
        spec("even?", 1, Some(1), true, prim_even),
        spec("odd?", 1, Some(1), true, prim_odd),
        spec("negative?", 1, Some(1), true, prim_negative),
        spec("positive?", 1, Some(1), true, prim_positive),
        spec("zero?", 1, Some(1), true, prim_zero),
        spec("number?", 1, Some(1), true, prim_number_p),
        spec("boolean?", 1, Some(1), true, prim_boolean_p),
        spec("string?", 1, Some(1), true, prim_string_p),
        spec("pair?", 1, Some(1), true, prim_pair_p),
        spec("not", 1, Some(1), true, prim_not),
        spec("cons", 2, Some(2), true, prim_cons),
        spec("car", 1, Some(1), true, prim_car),
        spec("cdr", 1, Some(1), true, prim_cdr),
        spec("vector-ref", 2, Some(2), true, prim_vector_ref),
        spec("vector-length", 1, Some(1), true, prim_vector_length),
        spec("make-vector", 1, Some(2), true, prim_make_vector),
        spec("string-length", 1, Some(1), true, prim_string_length),
        spec("string-append", 2, None, false, prim_string_append),
        spec("substring", 3, Some(3), false, prim_substring),
        spec("smallest", 2, Some(2), true, prim_smallest),
        spec("largest", 2, Some(2), true, prim_largest),
    ]
}
