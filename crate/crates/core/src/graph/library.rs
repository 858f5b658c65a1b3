use std::collections::BTreeMap;

/// Member tables of library classes that take part in `Usage` edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryManifest {
    pub classes: BTreeMap<String, Vec<String>>,
}

const BUILTIN: &[(&str, &[&str])] = &[
    (
        "Array",
        &[
            "length", "push", "pop", "concat", "slice", "indexOf", "join", "reverse", "includes",
        ],
    ),
    (
        "Date",
        &[
            "getTime",
            "getDay",
            "getFullYear",
            "getMonth",
            "toISOString",
            "setTime",
        ],
    ),
    ("Error", &["message", "name", "stack"]),
    (
        "Map",
        &[
            "get", "set", "has", "delete", "clear", "size", "keys", "values",
        ],
    ),
    ("Promise", &["then", "catch", "finally"]),
    ("RegExp", &["test", "exec", "source", "flags", "lastIndex"]),
    ("Set", &["add", "has", "delete", "clear", "size", "values"]),
    ("number", &["toFixed", "toPrecision", "toString", "valueOf"]),
    (
        "string",
        &[
            "length",
            "concat",
            "substring",
            "indexOf",
            "toUpperCase",
            "toLowerCase",
            "split",
            "trim",
            "charAt",
            "startsWith",
            "endsWith",
            "replace",
            "includes",
            "slice",
        ],
    ),
];

impl Default for LibraryManifest {
    fn default() -> Self {
        LibraryManifest {
            classes: BUILTIN
                .iter()
                .map(|(c, ms)| (c.to_string(), ms.iter().map(|m| m.to_string()).collect()))
                .collect(),
        }
    }
}

impl LibraryManifest {
    pub fn empty() -> Self {
        LibraryManifest {
            classes: BTreeMap::new(),
        }
    }

    /// Library classes defining `member`, in name order.
    pub fn classes_with<'a>(&'a self, member: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.classes
            .iter()
            .filter(move |(_, ms)| ms.iter().any(|m| m == member))
            .map(|(c, _)| c.as_str())
    }
}
