#include <doctest.h>

#include "htmlcure/html_dom.hpp"

using namespace htmlcure::dom;

TEST_CASE("basic structure, doctype, and title") {
    Document doc = parse_document(
        "<!DOCTYPE html><html><head><title>My Page</title></head>"
        "<body><h1 id=\"top\">Hello</h1><p>World</p></body></html>");
    CHECK(doc.parse_ok);
    CHECK(doc.has_doctype);
    CHECK(doc.title == "My Page");
    CHECK(doc.html_closed);
    CHECK(doc.unclosed_tag_count == 0);
    const Element* h1 = select_first(doc, "#top");
    REQUIRE(h1 != nullptr);
    CHECK(h1->tag == "h1");
    CHECK(h1->text == "Hello");
    CHECK(doc.body_text.find("Hello") != std::string::npos);
    CHECK(doc.body_text.find("World") != std::string::npos);
}

TEST_CASE("attribute forms: quoted, single-quoted, bare, boolean") {
    Document doc = parse_document(
        "<html><body>"
        "<input id=\"a\" type='text' disabled value=plain>"
        "<div data-x=\"1 2\" class=\"one two\"></div>"
        "</body></html>");
    const Element* input = select_first(doc, "#a");
    REQUIRE(input != nullptr);
    CHECK(input->attr("type") == "text");
    CHECK(input->has_attr("disabled"));
    CHECK(input->attr("value") == "plain");
    const Element* div = select_first(doc, ".two");
    REQUIRE(div != nullptr);
    CHECK(div->attr("data-x") == "1 2");
}

TEST_CASE("comments and stray angle brackets do not derail parsing") {
    Document doc = parse_document(
        "<html><body><!-- a <p> inside a comment -->"
        "<p>3 < 5 is true</p></body></html>");
    auto paragraphs = select_all(doc, "p");
    REQUIRE(paragraphs.size() == 1);
    CHECK(doc.body_text.find("3 < 5 is true") != std::string::npos);
}

TEST_CASE("void elements never count as unclosed") {
    Document doc = parse_document(
        "<html><head><meta charset=\"utf-8\"><link rel=\"icon\" href=\"x.ico\"></head>"
        "<body><img src=\"a.png\"><br><input></body></html>");
    CHECK(doc.unclosed_tag_count == 0);
}

TEST_CASE("unclosed tags are counted") {
    Document doc = parse_document("<html><body><div><p>open everywhere");
    CHECK(doc.unclosed_tag_count >= 2); // div and p at least
    CHECK_FALSE(doc.html_closed);
}

TEST_CASE("script and style are raw text") {
    Document doc = parse_document(
        "<html><head><style>p > a { color: red }</style>"
        "<script>if (a < b && b > c) { requestAnimationFrame(fn); }</script></head>"
        "<body><p>x</p></body></html>");
    CHECK(doc.has_style);
    CHECK(doc.has_script);
    CHECK(doc.has_raf);
    // Style/script interiors never leak into body text or elements.
    CHECK(doc.body_text.find("color") == std::string::npos);
    CHECK(select_all(doc, "a").empty());
}

TEST_CASE("hook blocks are captured separately from page script") {
    Document doc = parse_document(
        "<html><body><p>app</p>"
        "<script type=\"text/x-synth-hooks\">{\"state\":{\"n\":1}}</script>"
        "</body></html>");
    CHECK(doc.hooks_source.find("\"n\":1") != std::string::npos);
    CHECK_FALSE(doc.has_script); // hooks are not page script
}

TEST_CASE("external resources and input types are collected") {
    Document doc = parse_document(
        "<html><head><link rel=\"stylesheet\" href=\"https://cdn.example/x.css\"></head>"
        "<body><script src=\"//cdn.example/lib.js\"></script>"
        "<img src=\"https://cdn.example/a.png\">"
        "<img src=\"local.png\">"
        "<input type=\"email\"><input></body></html>");
    CHECK(doc.external_resources.size() == 3);
    REQUIRE(doc.input_types.size() == 2);
    CHECK(doc.input_types[0] == "email");
    CHECK(doc.input_types[1] == "text");
}

TEST_CASE("viewport meta detection") {
    Document with = parse_document(
        "<html><head><meta name=\"viewport\" content=\"width=device-width\"></head>"
        "<body><p>x</p></body></html>");
    CHECK(with.has_viewport_meta);
    Document without = parse_document(
        "<html><head><meta charset=\"utf-8\"></head><body><p>x</p></body></html>");
    CHECK_FALSE(without.has_viewport_meta);
}

TEST_CASE("selectors: id, class, tag, text") {
    Document doc = parse_document(
        "<html><body>"
        "<button id=\"go\" class=\"primary big\">Start run</button>"
        "<button class=\"primary\">Stop</button>"
        "<a href=\"#\">Start over</a>"
        "</body></html>");
    CHECK(select_first(doc, "#go")->attr("class") == "primary big");
    CHECK(select_all(doc, ".primary").size() == 2);
    CHECK(select_all(doc, "button").size() == 2);
    // text= matches interactive elements containing the text.
    auto starts = select_all(doc, "text=Start");
    CHECK(starts.size() == 2);
    CHECK(select_all(doc, "text=Stop").size() == 1);
    CHECK(select_first(doc, "#missing") == nullptr);
}

TEST_CASE("interactive tag detection") {
    Document doc = parse_document(
        "<html><body>"
        "<button>b</button><a href=\"/x\">link</a><a>anchor</a>"
        "<input type=\"hidden\"><input type=\"text\">"
        "<div onclick=\"f()\">live</div><div>dead</div>"
        "<span tabindex=\"0\">focusable</span>"
        "</body></html>");
    int interactive = 0;
    for (const auto& e : doc.elements)
        if (is_interactive_tag(e)) ++interactive;
    CHECK(interactive == 5); // button, a[href], input[text], onclick div, tabindex span
}

TEST_CASE("tagless text is not a document") {
    Document doc = parse_document("just some words without any markup");
    CHECK_FALSE(doc.parse_ok);
    CHECK(doc.elements.empty());
}

TEST_CASE("random byte soup never crashes the parser") {
    std::uint64_t state = 0xd05eedull;
    auto next = [&state] {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    const char alphabet[] = "<>/=\"' abcdefghij-!{}[]&;\n\t\0#.";
    for (int round = 0; round < 500; ++round) {
        std::string soup;
        std::size_t len = next() % 400;
        for (std::size_t i = 0; i < len; ++i)
            soup += alphabet[next() % (sizeof(alphabet) - 1)];
        Document doc = parse_document(soup); // must terminate without throwing
        for (const auto& e : doc.elements) CHECK(!e.tag.empty());
        select_all(doc, "#x");
        select_all(doc, ".y");
        select_all(doc, "text=a");
        select_all(doc, "div");
    }
}

TEST_CASE("nested text accumulates into ancestors once per run") {
    Document doc = parse_document(
        "<html><body><div id=\"outer\"><span>alpha</span> <span>beta</span></div></body></html>");
    const Element* outer = select_first(doc, "#outer");
    REQUIRE(outer != nullptr);
    CHECK(outer->text.find("alpha") != std::string::npos);
    CHECK(outer->text.find("beta") != std::string::npos);
}
