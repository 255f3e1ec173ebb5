#include "support.hpp"

#include "protector/error.hpp"
#include "protector/wat.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace protector;

TEST_CASE("classification follows the mnemonic", "[ir]") {
    CHECK(classify_instruction("i32.const") == Category::arithmetic);
    CHECK(classify_instruction("i32.shr_u") == Category::arithmetic);
    CHECK(classify_instruction("i32.eqz") == Category::arithmetic);
    CHECK(classify_instruction("global.set") == Category::variable);
    CHECK(classify_instruction("local.tee") == Category::variable);
    CHECK(classify_instruction("i32.load8_u") == Category::memory);
    CHECK(classify_instruction("memory.size") == Category::memory);
    CHECK(classify_instruction("unreachable") == Category::control);
    CHECK(classify_instruction("drop") == Category::control);
    CHECK(classify_instruction("call_indirect") == Category::control);
    CHECK_THROWS_AS(classify_instruction("i64.add"), Error);

    // Every opcode round-trips through its mnemonic and lands in a reported category.
    for (std::size_t i = 0; i < kOpcodeCount; ++i) {
        const auto op = static_cast<Opcode>(i);
        CHECK(lookup_opcode(info(op).mnemonic) == op);
        CHECK(classify(op) != Category::other);
    }
}

TEST_CASE("fresh_local appends after params and locals", "[ir]") {
    Module m;
    const auto ty = intern_type(m, {ValueKind::i32, ValueKind::i32}, std::nullopt);
    FunctionDef fn;
    fn.type_index = ty;
    fn.locals = {ValueKind::i32, ValueKind::i32, ValueKind::i32};
    CHECK(fresh_local(m, fn, ValueKind::i32) == 5);
    CHECK(fresh_local(m, fn, ValueKind::i32) == 6);
    CHECK(fn.locals.size() == 5);

    // The added locals show up in the printed header.
    m.functions.push_back(fn);
    const auto text = wat::print_module(m);
    CHECK(wat::parse_module(text).functions[0].locals.size() == 5);
}

TEST_CASE("find_stack_pointer prefers the conventional name", "[ir]") {
    auto m = wat::parse_module(R"((module
        (global $a (mut i32) (i32.const 0))
        (global $__stack_pointer (mut i32) (i32.const 4096))
        (global $c i32 (i32.const 0))))");
    CHECK(find_stack_pointer(m) == StackPointerRef{1, "$__stack_pointer"});
    CHECK(find_stack_pointer(m, "$a").global_index == 0);
    CHECK_THROWS_AS(find_stack_pointer(m, "$c"), TransformError);   // immutable
    CHECK_THROWS_AS(find_stack_pointer(m, "$zzz"), TransformError); // missing

    auto single = wat::parse_module("(module (global $sp (mut i32) (i32.const 1)) (global i32 (i32.const 2)))");
    CHECK(find_stack_pointer(single).global_index == 0);

    auto ambiguous = wat::parse_module("(module (global (mut i32) (i32.const 1)) (global (mut i32) (i32.const 2)))");
    CHECK_THROWS_AS(find_stack_pointer(ambiguous), TransformError);
    CHECK_THROWS_AS(find_stack_pointer(Module{}), TransformError);
}

TEST_CASE("add_function_import shifts every defined-function reference", "[ir]") {
    auto m = wat::parse_module(R"((module
        (func $a (export "a") call $b)
        (func $b)
        (table 2 funcref)
        (elem (i32.const 0) func $b $a)
        (start $a)))");
    const auto idx = add_function_import(m, Import{"env", "time", intern_type(m, {}, ValueKind::i32), "$t"});
    CHECK(idx == 0);
    CHECK(m.functions[0].body[0].index == 2);
    CHECK(m.elements[0].functions == std::vector<std::uint32_t>{2, 1});
    CHECK(m.exports[0].index == 1);
    CHECK(m.start == 1U);
    CHECK(m.display_name(2) == "$b");
    CHECK(wat::parse_module(wat::print_module(m)) == m);
}

TEST_CASE("match_ends pairs blocks and rejects imbalance", "[ir]") {
    using I = Instruction;
    std::vector<I> body = {I::block(), I::loop(), I::simple(Opcode::end), I::simple(Opcode::end)};
    const auto ends = match_ends(body);
    CHECK(ends[0] == 3);
    CHECK(ends[1] == 2);
    CHECK_THROWS_AS(match_ends({I::block()}), Error);
    CHECK_THROWS_AS(match_ends({I::simple(Opcode::end)}), Error);
}

TEST_CASE("wrapping turns returns into branches to the wrapper", "[wrap]") {
    auto m = wat::parse_module(R"((module
        (func (param i32) (result i32)
          block
            block
              local.get 0
              br_if 1
              i32.const 7
              return
            end
          end
          i32.const 9)))");
    auto fn = m.functions[0];
    wrap_body_for_epilogue(m, fn);
    REQUIRE(fn.body.size() == m.functions[0].body.size() + 2);
    CHECK(fn.body.front().op == Opcode::block);
    CHECK(fn.body.front().block_result == ValueKind::i32);
    CHECK(fn.body.back().op == Opcode::end);
    // `return` at nesting depth 2 becomes `br 2`, which now names the wrapper.
    CHECK(fn.body[6] == Instruction::br(2));
    // Existing branches keep their depth.
    CHECK(fn.body[4] == Instruction::br_if(1));
}

TEST_CASE("wrapped bodies behave like the originals", "[wrap]") {
    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round) {
        const auto original = test::random_exit_module(rng, 4);
        auto wrapped = original;
        for (auto& fn : wrapped.functions) wrap_body_for_epilogue(wrapped, fn);

        for (std::uint32_t arg : {0U, 5U, 31U, 40U, 63U, 64U, 100U, 0xFFFFFFFFU}) {
            Instance a(original);
            Instance b(wrapped);
            for (std::uint32_t f = 0; f < original.functions.size(); ++f) {
                INFO("round " << round << " function " << f << " arg " << arg << "\n" << wat::print_module(original));
                const std::uint32_t args[] = {arg};
                const auto ra = a.invoke_function(f, args);
                const auto rb = b.invoke_function(f, args);
                REQUIRE(ra.outcome == rb.outcome);
                // Only the wrapper's block and end are added per call.
                std::uint64_t calls = 0;
                for (auto c : rb.counters.calls) calls += c;
                CHECK(rb.counters.total() == ra.counters.total() + 2 * calls);
                CHECK(rb.counters.calls == ra.counters.calls);
            }
            CHECK(std::equal(a.memory().begin(), a.memory().end(), b.memory().begin()));
            CHECK(a.globals() == b.globals());
        }
    }
}
