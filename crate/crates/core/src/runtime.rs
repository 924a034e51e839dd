//! Meta-SQL built-ins: EXTRACT, CMB, EVAL, UEVAL, and calls of declared
//! transform functions from within query evaluation.

use std::collections::HashMap;
use std::sync::Arc;

use crate::engine::{project, Column, Engine, ExecError, Table};
use crate::sql::{from_xml, Query, SqlError};
use crate::value::{ColumnType, Value};
use crate::xform::{check_args, result_to_value, run_transform_with_limit, TransformError, TransformProgram};
use crate::xml::{is_valid_name, Element, XmlDoc, XmlNode};
use crate::xpath::{eval_on_doc, parse_xpath, Bindings, Expr};

/// Name of the single column produced by EXTRACT and UEVAL.
pub const RESULT_COLUMN: &str = "result";

/// Declared transform functions, looked up without regard to ASCII case.
#[derive(Debug, Clone, Default)]
pub struct Functions {
    map: HashMap<String, Arc<TransformProgram>>,
}

impl Functions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `program` under its own name, returning any program it replaces.
    pub fn insert(&mut self, program: TransformProgram) -> Option<Arc<TransformProgram>> {
        self.map.insert(program.name.to_ascii_lowercase(), Arc::new(program))
    }

    pub fn get(&self, name: &str) -> Option<&Arc<TransformProgram>> {
        self.map.get(&name.to_ascii_lowercase())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<TransformProgram>> {
        self.map.values()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn result_table(rows: Vec<Vec<Value>>) -> Table {
    Table {
        columns: vec![Column::new(RESULT_COLUMN, ColumnType::Xml)],
        rows,
    }
}

/// The EXTRACT result for a Null document.
pub fn extract_empty() -> Table {
    result_table(Vec::new())
}

/// One row per selected node, in document order; each row holds a copy of
/// the node's subtree as its own document.
pub fn extract(doc: &XmlDoc, path: &str) -> Result<Table, ExecError> {
    extract_expr(doc, &parse_xpath(path)?)
}

pub fn extract_expr(doc: &XmlDoc, expr: &Expr) -> Result<Table, ExecError> {
    let nodes = eval_on_doc(expr, doc, &Bindings::new())?.into_node_set()?;
    let mut rows = Vec::with_capacity(nodes.len());
    for n in nodes {
        let d = n.to_doc().ok_or_else(|| {
            ExecError::TypeMismatch(format!("path `{expr}` selected a text node; EXTRACT returns elements"))
        })?;
        rows.push(vec![Value::xml(d)]);
    }
    Ok(result_table(rows))
}

/// Combines documents under a `cmb` root, in the given order. Null when
/// there is nothing to combine.
pub fn cmb(docs: &[Arc<XmlDoc>]) -> Value {
    if docs.is_empty() {
        return Value::Null;
    }
    let mut root = Element::new("cmb");
    for d in docs {
        root.push(d.root().clone());
    }
    Value::xml(XmlDoc::new(root))
}

/// The `row` document of one output row: a child per non-Null column.
pub fn row_doc(columns: &[Column], row: &[Value]) -> Result<XmlDoc, ExecError> {
    let mut root = Element::new("row");
    for (c, v) in columns.iter().zip(row) {
        if !is_valid_name(&c.name) {
            return Err(ExecError::InvalidElementName(c.name.clone()));
        }
        let mut e = Element::new(c.name.clone());
        match v {
            Value::Null => continue,
            Value::Xml(d) => e.push(d.root().clone()),
            other => {
                let text = other.to_text().unwrap_or_default();
                if !text.is_empty() {
                    e.push(XmlNode::text(text));
                }
            }
        }
        root.push(e);
    }
    Ok(XmlDoc::new(root))
}

/// Decodes a stored query document.
pub fn decode_query(doc: &XmlDoc) -> Result<Query, ExecError> {
    from_xml(doc).map_err(|e| match e {
        SqlError::InvalidSyntaxTree { path, reason } => ExecError::InvalidSyntaxTree { path, reason },
        other => ExecError::InvalidSyntaxTree {
            path: "/".into(),
            reason: other.to_string(),
        },
    })
}

/// Untyped dynamic evaluation: runs the stored query and presents each
/// output row as a `row` document.
pub fn ueval(doc: &XmlDoc, engine: &Engine) -> Result<Table, ExecError> {
    let q = decode_query(doc)?;
    let t = engine.execute(&q)?;
    let rows = t
        .rows
        .iter()
        .map(|r| row_doc(&t.columns, r).map(|d| vec![Value::xml(d)]))
        .collect::<Result<_, _>>()?;
    Ok(result_table(rows))
}

/// Typed dynamic evaluation: runs the stored query and projects the result
/// on `scheme`.
pub fn eval_typed(doc: &XmlDoc, engine: &Engine, scheme: &[String]) -> Result<Table, ExecError> {
    let q = decode_query(doc)?;
    project(&engine.execute(&q)?, scheme)
}

/// Calls a declared function. `args[0]` is the input document, the rest
/// bind the declared parameters. A Null anywhere yields Null.
pub fn invoke_function(program: &TransformProgram, args: &[Value], depth_limit: usize) -> Result<Value, ExecError> {
    let Some((input, rest)) = args.split_first() else {
        return Err(TransformError::ArityMismatch {
            function: program.name.clone(),
            expected: program.params.len(),
            found: 0,
        }
        .into());
    };
    if rest.len() != program.params.len() {
        return Err(TransformError::ArityMismatch {
            function: program.name.clone(),
            expected: program.params.len(),
            found: rest.len(),
        }
        .into());
    }
    if args.iter().any(Value::is_null) {
        return Ok(Value::Null);
    }
    let Value::Xml(doc) = input else {
        return Err(TransformError::ArgTypeMismatch {
            function: program.name.clone(),
            param: "input document".into(),
            expected: ColumnType::Xml,
            found: input.column_type().map_or("null".into(), |t| t.to_string()),
        }
        .into());
    };
    check_args(program, rest)?;
    let fragment = run_transform_with_limit(program, doc, rest, depth_limit)?;
    Ok(result_to_value(&fragment, program.return_type)?)
}
