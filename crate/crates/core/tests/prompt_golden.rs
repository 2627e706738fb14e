mod common;

use common::fixed_context;
use studentsim::prompts::{TemplateId, TemplateRegistry};

#[test]
fn every_template_matches_its_golden_file() {
    let profile = common::sample_profile();
    let ctx = fixed_context(&profile);
    let reg = TemplateRegistry::builtin();
    let mut failures = Vec::new();
    for id in TemplateId::ALL {
        let text = reg.render(id, &ctx).unwrap();
        assert!(text.contains(id.anchor()), "{id} lost its anchor sentence");
        if let Err(e) = common::check_golden(&format!("prompts/{id}.txt"), &text) {
            failures.push(e);
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn rendering_is_stable() {
    let profile = common::sample_profile();
    let reg = TemplateRegistry::builtin();
    for id in TemplateId::ALL {
        assert_eq!(
            reg.render(id, &fixed_context(&profile)).unwrap(),
            reg.render(id, &fixed_context(&profile)).unwrap()
        );
    }
}

#[test]
fn shipped_directory_loads_like_builtin() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
    let loaded = TemplateRegistry::load_dir(&dir).unwrap();
    let builtin = TemplateRegistry::builtin();
    for id in TemplateId::ALL {
        assert_eq!(loaded.get(id).body(), builtin.get(id).body());
    }
}
