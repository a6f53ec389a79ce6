#include "dacq/constants.hpp"

#include "dacq/numeric.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace dacq {

namespace {

enum class Shape : std::uint8_t { Small, Big, Text };

struct Entry {
    std::string text;
    Shape shape = Shape::Text;
    std::int64_t small = 0;
    Rational big;
};

struct Interner {
    std::shared_mutex mutex;
    std::deque<Entry> entries;
    std::unordered_map<std::string, Const> ids;
};

Interner& interner() {
    static Interner instance;
    return instance;
}

Entry make_entry(std::string_view text) {
    Entry e;
    e.text = std::string(text);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && ptr == text.data() + text.size() && !text.empty()) {
        e.shape = Shape::Small;
        e.small = v;
        return e;
    }
    if (auto r = parse_rational(text)) {
        e.shape = Shape::Big;
        e.big = *r;
    }
    return e;
}

int compare_entries(const Entry& a, const Entry& b) {
    bool an = a.shape != Shape::Text;
    bool bn = b.shape != Shape::Text;
    if (an != bn) return an ? -1 : 1;
    if (an) {
        int c = 0;
        if (a.shape == Shape::Small && b.shape == Shape::Small) {
            c = a.small < b.small ? -1 : (a.small > b.small ? 1 : 0);
        } else {
            Rational x = a.shape == Shape::Small ? Rational(a.small) : a.big;
            Rational y = b.shape == Shape::Small ? Rational(b.small) : b.big;
            c = x < y ? -1 : (y < x ? 1 : 0);
        }
        if (c != 0) return c;
    }
    int t = a.text.compare(b.text);
    return t < 0 ? -1 : (t > 0 ? 1 : 0);
}

}  // namespace

Const intern(std::string_view text) {
    Interner& in = interner();
    {
        std::shared_lock lock(in.mutex);
        if (auto it = in.ids.find(std::string(text)); it != in.ids.end()) return it->second;
    }
    std::unique_lock lock(in.mutex);
    if (auto it = in.ids.find(std::string(text)); it != in.ids.end()) return it->second;
    Const id = static_cast<Const>(in.entries.size());
    in.entries.push_back(make_entry(text));
    in.ids.emplace(std::string(text), id);
    return id;
}

std::string const_text(Const c) {
    Interner& in = interner();
    std::shared_lock lock(in.mutex);
    return in.entries.at(c).text;
}

int const_compare(Const a, Const b) {
    if (a == b) return 0;
    Interner& in = interner();
    std::shared_lock lock(in.mutex);
    return compare_entries(in.entries.at(a), in.entries.at(b));
}

void sort_unique_constants(std::vector<Const>& values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    Interner& in = interner();
    std::shared_lock lock(in.mutex);
    bool all_small = std::all_of(values.begin(), values.end(), [&](Const c) { return in.entries[c].shape == Shape::Small; });
    if (all_small) {
        std::vector<std::pair<std::int64_t, Const>> keyed;
        keyed.reserve(values.size());
        for (Const c : values) keyed.emplace_back(in.entries[c].small, c);
        std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return in.entries[a.second].text < in.entries[b.second].text;
        });
        for (std::size_t i = 0; i < keyed.size(); ++i) values[i] = keyed[i].second;
        return;
    }
    std::sort(values.begin(), values.end(), [&](Const a, Const b) {
        return compare_entries(in.entries[a], in.entries[b]) < 0;
    });
}

bool const_is_numeric(Const c) {
    Interner& in = interner();
    std::shared_lock lock(in.mutex);
    return in.entries.at(c).shape != Shape::Text;
}

std::optional<Rational> const_value(Const c) {
    Interner& in = interner();
    std::shared_lock lock(in.mutex);
    const Entry& e = in.entries.at(c);
    if (e.shape == Shape::Small) return Rational(e.small);
    if (e.shape == Shape::Big) return e.big;
    return std::nullopt;
}

}  // namespace dacq
