//! Structural validation of query documents against the syntax-tree DTD.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use crate::xml::{Element, XmlDoc, XmlNode};

/// The document type, with `sel-item` parenthesized as intended and the
/// `group-by` spelling used throughout.
pub const SYNTAX_TREE_DTD: &str = r#"
<!ELEMENT query ((select, from, where?, group-by?, having?) | (union | except | intersect))>
<!ELEMENT select ((all | distinct)?, (wildcard | sel-item+))>
<!ELEMENT all EMPTY>
<!ELEMENT distinct EMPTY>
<!ELEMENT wildcard EMPTY>
<!ELEMENT sel-item (((column | (rangevar, (column | wildcard))) | scalar | aggregate), alias?)>
<!ELEMENT rangevar (#PCDATA)>
<!ELEMENT column (#PCDATA)>
<!ELEMENT column-ref (rangevar?, column)>
<!ELEMENT scalar (alg-exp | concat-exp | column-ref | aggregate | constant | query)>
<!ELEMENT aggregate (count-all | ((avg | count | max | min | sum), (all | distinct)?, (alg-exp | concat-exp | column-ref | constant | query)))>
<!ELEMENT count-all EMPTY>
<!ELEMENT avg EMPTY>
<!ELEMENT count EMPTY>
<!ELEMENT max EMPTY>
<!ELEMENT min EMPTY>
<!ELEMENT sum EMPTY>
<!ELEMENT alg-exp (scalar, (add | sub | mul | div), scalar)>
<!ELEMENT add EMPTY>
<!ELEMENT sub EMPTY>
<!ELEMENT mul EMPTY>
<!ELEMENT div EMPTY>
<!ELEMENT concat-exp (scalar, scalar)>
<!ELEMENT constant (#PCDATA)>
<!ELEMENT from (table-ref+)>
<!ELEMENT table-ref ((table | query), alias?)>
<!ELEMENT alias (#PCDATA)>
<!ELEMENT table (#PCDATA)>
<!ELEMENT where (cond-exp)>
<!ELEMENT cond-exp (not?, (cond-test | and | or))>
<!ELEMENT not EMPTY>
<!ELEMENT cond-test (comparison | like | in | match | all-or-any | exists | unique | overlaps | test-for-null)>
<!ELEMENT and (cond-exp, cond-exp+)>
<!ELEMENT or (cond-exp, cond-exp+)>
<!ELEMENT rowconstr (column-ref | scalar)+>
<!ELEMENT comparison (rowconstr, (eq | lt | let | gt | get | neq), rowconstr)>
<!ELEMENT eq EMPTY>
<!ELEMENT lt EMPTY>
<!ELEMENT let EMPTY>
<!ELEMENT gt EMPTY>
<!ELEMENT get EMPTY>
<!ELEMENT neq EMPTY>
<!ELEMENT like ((column-ref | scalar), (column-ref | scalar), (column-ref | scalar)?)>
<!ELEMENT in ((rowconstr, query) | (scalar, scalar+))>
<!ELEMENT partial EMPTY>
<!ELEMENT full EMPTY>
<!ELEMENT match (rowconstr, unique?, (partial | full)?, query)>
<!ELEMENT all-or-any (rowconstr, (eq | lt | let | gt | get | neq), (all | any)?, query)>
<!ELEMENT any EMPTY>
<!ELEMENT exists (query)>
<!ELEMENT unique (query)>
<!ELEMENT overlaps (scalar, scalar, scalar, scalar)>
<!ELEMENT test-for-null (rowconstr)>
<!ELEMENT group-by (column-ref+)>
<!ELEMENT having (cond-exp)>
<!ELEMENT union (query, all?, query)>
<!ELEMENT except (query, all?, query)>
<!ELEMENT intersect (query, all?, query)>
"#;

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Empty,
    Text,
    Children(Cm),
}

#[derive(Debug, Clone, PartialEq)]
enum Cm {
    Name(String),
    Seq(Vec<Cm>),
    Alt(Vec<Cm>),
    Opt(Box<Cm>),
    Plus(Box<Cm>),
}

fn models() -> &'static HashMap<String, Model> {
    static MODELS: OnceLock<HashMap<String, Model>> = OnceLock::new();
    MODELS.get_or_init(|| parse_dtd(SYNTAX_TREE_DTD))
}

fn parse_dtd(text: &str) -> HashMap<String, Model> {
    let mut out = HashMap::new();
    for decl in text.split("<!ELEMENT").skip(1) {
        let decl = decl.trim().trim_end_matches('>').trim();
        let (name, spec) = decl.split_once(char::is_whitespace).expect("element declaration");
        let spec = spec.trim();
        let model = match spec {
            "EMPTY" => Model::Empty,
            "(#PCDATA)" => Model::Text,
            _ => {
                let toks = cm_tokens(spec);
                let mut i = 0;
                let cm = parse_cm(&toks, &mut i);
                assert_eq!(i, toks.len(), "trailing tokens in model of {name}");
                Model::Children(cm)
            }
        };
        out.insert(name.to_string(), model);
    }
    out
}

fn cm_tokens(spec: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for c in spec.chars() {
        if matches!(c, '(' | ')' | ',' | '|' | '?' | '+' | '*') || c.is_whitespace() {
            if !cur.is_empty() {
                toks.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                toks.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn parse_cm(toks: &[String], i: &mut usize) -> Cm {
    let atom = if toks[*i] == "(" {
        *i += 1;
        let mut items = vec![parse_cm(toks, i)];
        let mut sep = None;
        while toks[*i] != ")" {
            let s = toks[*i].clone();
            assert!(sep.is_none() || sep.as_deref() == Some(s.as_str()), "mixed separators");
            sep = Some(s);
            *i += 1;
            items.push(parse_cm(toks, i));
        }
        *i += 1;
        match (items.len(), sep.as_deref()) {
            (1, _) => items.pop().expect("one item"),
            (_, Some("|")) => Cm::Alt(items),
            _ => Cm::Seq(items),
        }
    } else {
        *i += 1;
        Cm::Name(toks[*i - 1].clone())
    };
    match toks.get(*i).map(String::as_str) {
        Some("?") => {
            *i += 1;
            Cm::Opt(Box::new(atom))
        }
        Some("+") => {
            *i += 1;
            Cm::Plus(Box::new(atom))
        }
        _ => atom,
    }
}

/// All positions reachable after matching `cm` starting at each of `starts`.
fn step(cm: &Cm, names: &[&str], starts: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = match cm {
        Cm::Name(n) => starts
            .into_iter()
            .filter(|&s| names.get(s) == Some(&n.as_str()))
            .map(|s| s + 1)
            .collect(),
        Cm::Seq(items) => items.iter().fold(starts, |acc, it| step(it, names, acc)),
        Cm::Alt(items) => items.iter().flat_map(|it| step(it, names, starts.clone())).collect(),
        Cm::Opt(inner) => {
            let mut v = step(inner, names, starts.clone());
            v.extend(starts);
            v
        }
        Cm::Plus(inner) => {
            let mut all = Vec::new();
            let mut frontier = step(inner, names, starts);
            while !frontier.is_empty() {
                frontier.retain(|p| !all.contains(p));
                all.extend(frontier.iter().copied());
                frontier = step(inner, names, frontier);
            }
            all
        }
    };
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// Checks every element of `doc` against its content model and reports all
/// violations. `group_by` is accepted as a spelling of `group-by`.
pub fn validate_tree(doc: &XmlDoc) -> Validation {
    let mut diagnostics = Vec::new();
    let root = doc.root();
    if root.name != "query" {
        diagnostics.push(Diagnostic {
            path: format!("/{}", root.name),
            message: "root element must be <query>".to_string(),
        });
    } else {
        check(root, None, &format!("/{}", root.name), &mut diagnostics);
    }
    Validation {
        valid: diagnostics.is_empty(),
        diagnostics,
    }
}

pub(crate) fn normalized_name(name: &str) -> &str {
    if name == "group_by" {
        "group-by"
    } else {
        name
    }
}

fn check(e: &Element, parent: Option<&str>, path: &str, out: &mut Vec<Diagnostic>) {
    let name = normalized_name(&e.name);
    // Inside `match`, `unique` is the empty flag, not the predicate.
    let model = if parent == Some("match") && name == "unique" {
        Some(&Model::Empty)
    } else {
        models().get(name)
    };
    let Some(model) = model else {
        out.push(Diagnostic {
            path: path.to_string(),
            message: format!("<{}> is not a syntax-tree element", e.name),
        });
        return;
    };
    let diag = |message: String| Diagnostic {
        path: path.to_string(),
        message,
    };
    match model {
        Model::Empty => {
            if !e.children.is_empty() {
                out.push(diag(format!("<{}> must be empty", e.name)));
            }
        }
        Model::Text => {
            if e.children.iter().any(|c| matches!(c, XmlNode::Element(_))) {
                out.push(diag(format!("<{}> must contain only text", e.name)));
            }
        }
        Model::Children(cm) => {
            if e.children.iter().any(|c| matches!(c, XmlNode::Text(_))) {
                out.push(diag(format!("text is not allowed directly inside <{}>", e.name)));
            }
            let kids: Vec<&Element> = e.elements().collect();
            let names: Vec<&str> = kids.iter().map(|k| normalized_name(&k.name)).collect();
            if !step(cm, &names, vec![0]).contains(&names.len()) {
                out.push(diag(format!(
                    "children ({}) do not match the content model of <{name}>",
                    names.join(", ")
                )));
            }
            for (k, kid) in kids.iter().enumerate() {
                let same = names.iter().filter(|n| **n == names[k]).count();
                let kpath = if same > 1 {
                    let idx = names[..k].iter().filter(|n| **n == names[k]).count() + 1;
                    format!("{path}/{}[{idx}]", kid.name)
                } else {
                    format!("{path}/{}", kid.name)
                };
                check(kid, Some(name), &kpath, out);
            }
        }
    }
}
