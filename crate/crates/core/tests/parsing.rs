use proptest::prelude::*;
use worksim_core::harness::parse::{parse_tool_calls, render_call, Parsed};
use worksim_core::tools::catalog;
use worksim_core::world::ToolCall;

fn call() -> impl Strategy<Value = ToolCall> {
    let names: Vec<String> = catalog().into_iter().map(|t| t.name).collect();
    (
        prop::sample::select(names),
        prop::collection::btree_map("[a-z]{1,8}", "[ -~]{0,40}", 0..4),
    )
        .prop_map(|(name, args)| {
            args.into_iter()
                .fold(ToolCall::new(&name), |c, (k, v)| c.arg(&k, v))
        })
}

proptest! {
    #[test]
    fn rendered_calls_parse_back(calls in prop::collection::vec(call(), 1..4), thought in "[a-zA-Z ,.]{0,60}") {
        let text = format!("{thought}\n{}", calls.iter().map(render_call).collect::<Vec<_>>().join("\n"));
        match parse_tool_calls(&text) {
            Parsed::Calls { calls: got, .. } => prop_assert_eq!(got, calls),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn parsing_never_panics(text in ".{0,200}") {
        let _ = parse_tool_calls(&text);
    }
}

#[test]
fn stop_and_think_forms() {
    assert!(matches!(
        parse_tool_calls("done <stop/>"),
        Parsed::Stop { .. }
    ));
    assert!(matches!(
        parse_tool_calls("<think>planning</think>"),
        Parsed::Think { .. }
    ));
    assert!(matches!(
        parse_tool_calls("<tool_call>{oops</tool_call>"),
        Parsed::Unparseable { .. }
    ));
}
