//! Loading a mini project from disk: application sources under `src/`,
//! test sources under `tests/`. Files that fail to parse are recorded and
//! skipped so one broken file never takes the whole project down.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use crate::ast::{ClassDecl, FnDecl, Item, SourceFile, TestDecl};
use crate::error::LangError;
use crate::parser::parse_file;
use crate::value::ClassInfo;

pub const SOURCE_EXT: &str = "mini";
pub const SRC_DIR: &str = "src";
pub const TESTS_DIR: &str = "tests";

#[derive(Debug)]
pub struct ClassDef {
    pub info: Rc<ClassInfo>,
    pub file: String,
    pub decl: ClassDecl,
    pub in_test_file: bool,
    /// Methods keyed by name; mini has no overloading.
    pub methods: BTreeMap<String, Rc<MethodDef>>,
    pub ctor_id: Option<String>,
}

#[derive(Debug)]
pub struct MethodDef {
    pub id: String,
    pub class: String,
    pub file: String,
    pub decl: FnDecl,
}

#[derive(Debug)]
pub struct TopFnDef {
    pub id: String,
    pub file: String,
    pub in_test_file: bool,
    pub decl: FnDecl,
}

#[derive(Debug)]
pub struct TestDef {
    pub id: String,
    pub file: String,
    pub decl: TestDecl,
}

#[derive(Debug, Default)]
pub struct Project {
    pub files: Vec<SourceFile>,
    pub errors: Vec<LangError>,
    pub classes: BTreeMap<String, Rc<ClassDef>>,
    pub functions: BTreeMap<String, Rc<TopFnDef>>,
    pub tests: BTreeMap<String, Rc<TestDef>>,
}

pub fn method_id(file: &str, class: &str, name: &str, arity: usize) -> String {
    format!("{file}::{class}::{name}/{arity}")
}

pub fn function_id(file: &str, name: &str, arity: usize) -> String {
    format!("{file}::{name}/{arity}")
}

pub fn test_id(file: &str, name: &str) -> String {
    format!("{file}::{name}")
}

impl Project {
    /// Load every `.mini` file under `src/` and `tests/` of `root`.
    pub fn load(root: &Path) -> std::io::Result<Project> {
        let mut sources = Vec::new();
        for dir in [SRC_DIR, TESTS_DIR] {
            let base = root.join(dir);
            if base.is_dir() {
                collect_sources(root, &base, &mut sources)?;
            }
        }
        sources.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Project::from_sources(sources))
    }

    /// Build a project from already-read `(relative path, text)` pairs.
    pub fn from_sources(sources: Vec<(String, String)>) -> Project {
        let mut project = Project::default();
        for (path, text) in &sources {
            match parse_file(path, text) {
                Ok(file) => project.files.push(file),
                Err(err) => project.errors.push(err),
            }
        }
        let files = std::mem::take(&mut project.files);
        for file in &files {
            project.index_file(file);
        }
        project.files = files;
        project
    }

    fn index_file(&mut self, file: &SourceFile) {
        let in_test_file = file.path.starts_with("tests/");
        for item in &file.items {
            match item {
                Item::Class(decl) => self.index_class(&file.path, decl, in_test_file),
                Item::Fn(decl) => {
                    let id = function_id(&file.path, &decl.name, decl.params.len());
                    if self.functions.contains_key(&decl.name) {
                        self.errors.push(LangError::Duplicate {
                            file: file.path.clone(),
                            name: decl.name.clone(),
                        });
                        continue;
                    }
                    self.functions.insert(
                        decl.name.clone(),
                        Rc::new(TopFnDef {
                            id,
                            file: file.path.clone(),
                            in_test_file,
                            decl: decl.clone(),
                        }),
                    );
                }
                Item::Test(decl) => {
                    if !in_test_file {
                        self.errors.push(LangError::Parse {
                            file: file.path.clone(),
                            pos: crate::error::Pos {
                                offset: decl.span.lo,
                                line: decl.span.line,
                                col: decl.span.col,
                            },
                            message: format!("test `{}` must live under {TESTS_DIR}/", decl.name),
                        });
                        continue;
                    }
                    let id = test_id(&file.path, &decl.name);
                    if self.tests.contains_key(&id) {
                        self.errors.push(LangError::Duplicate {
                            file: file.path.clone(),
                            name: decl.name.clone(),
                        });
                        continue;
                    }
                    self.tests.insert(
                        id.clone(),
                        Rc::new(TestDef {
                            id,
                            file: file.path.clone(),
                            decl: decl.clone(),
                        }),
                    );
                }
            }
        }
    }

    fn index_class(&mut self, file: &str, decl: &ClassDecl, in_test_file: bool) {
        if self.classes.contains_key(&decl.name) {
            self.errors.push(LangError::Duplicate {
                file: file.to_string(),
                name: decl.name.clone(),
            });
            return;
        }
        let info = Rc::new(ClassInfo {
            name: decl.name.clone(),
            fields: decl.fields.iter().map(|f| f.name.clone()).collect(),
        });
        let mut methods = BTreeMap::new();
        for m in &decl.methods {
            if methods.contains_key(&m.name) {
                self.errors.push(LangError::Duplicate {
                    file: file.to_string(),
                    name: m.name.clone(),
                });
                continue;
            }
            let id = method_id(file, &decl.name, &m.name, m.params.len());
            methods.insert(
                m.name.clone(),
                Rc::new(MethodDef {
                    id,
                    class: decl.name.clone(),
                    file: file.to_string(),
                    decl: m.clone(),
                }),
            );
        }
        let ctor_id = decl
            .ctor
            .as_ref()
            .map(|c| method_id(file, &decl.name, "constructor", c.params.len()));
        self.classes.insert(
            decl.name.clone(),
            Rc::new(ClassDef {
                info,
                file: file.to_string(),
                decl: decl.clone(),
                in_test_file,
                methods,
                ctor_id,
            }),
        );
    }

    pub fn class_of_method_id(&self, id: &str) -> Option<&Rc<ClassDef>> {
        self.classes
            .values()
            .find(|c| c.methods.values().any(|m| m.id == id) || c.ctor_id.as_deref() == Some(id))
    }
}

fn collect_sources(
    root: &Path,
    dir: &Path,
    out: &mut Vec<(String, String)>,
) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_sources(root, &path, out)?;
        } else if path.extension().and_then(|e| e.to_str()) == Some(SOURCE_EXT) {
            let rel = path
                .strip_prefix(root)
                .expect("source under project root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let text = std::fs::read_to_string(&path)?;
            out.push((rel, text));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Project {
        Project::from_sources(vec![
            (
                "src/counter.mini".into(),
                r#"
                class Counter {
                    var count;
                    constructor() { this.count = 0; }
                    fn bump(): void { this.count = this.count + 1; }
                    fn value(): int { return this.count; }
                }
                fn twice(x): int { return x * 2; }
                "#
                .into(),
            ),
            (
                "tests/counter_test.mini".into(),
                r#"
                fn helper(): int { return 41; }
                test bumpOnce() {
                    var c = new Counter();
                    c.bump();
                    assertEquals(1, c.value());
                }
                "#
                .into(),
            ),
        ])
    }

    #[test]
    fn indexes_classes_functions_and_tests() {
        let p = sample();
        assert!(p.errors.is_empty());
        assert!(p.classes.contains_key("Counter"));
        assert_eq!(
            p.classes["Counter"].ctor_id.as_deref(),
            Some("src/counter.mini::Counter::constructor/0")
        );
        assert_eq!(p.functions["twice"].id, "src/counter.mini::twice/1");
        assert!(p.functions["helper"].in_test_file);
        assert!(p.tests.contains_key("tests/counter_test.mini::bumpOnce"));
    }

    #[test]
    fn parse_error_is_recorded_and_other_files_survive() {
        let p = Project::from_sources(vec![
            ("src/bad.mini".into(), "class {".into()),
            ("src/ok.mini".into(), "fn f(): int { return 1; }".into()),
        ]);
        assert_eq!(p.errors.len(), 1);
        assert_eq!(p.errors[0].file(), "src/bad.mini");
        assert!(p.functions.contains_key("f"));
    }

    #[test]
    fn duplicate_class_is_an_error() {
        let p = Project::from_sources(vec![
            ("src/a.mini".into(), "class C { }".into()),
            ("src/b.mini".into(), "class C { }".into()),
        ]);
        assert_eq!(p.errors.len(), 1);
    }

    #[test]
    fn empty_project_loads() {
        let p = Project::from_sources(vec![]);
        assert!(p.classes.is_empty() && p.tests.is_empty() && p.errors.is_empty());
    }
}
