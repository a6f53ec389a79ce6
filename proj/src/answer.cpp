#include "dacq/answer.hpp"

#include "dacq/translate.hpp"

namespace dacq {

AnswerOrder::AnswerOrder(const Query& q, const Semiring& s) {
    for (const auto& e : q.head) {
        switch (e.kind) {
        case HeadEntry::Kind::Var: positions_.push_back(std::nullopt); break;
        case HeadEntry::Kind::Star: positions_.push_back(s); break;
        case HeadEntry::Kind::Agg: positions_.push_back(output_semiring(e.fn)); break;
        }
    }
}

int AnswerOrder::compare(const Answer& a, const Answer& b) const {
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        int c = positions_[i] ? positions_[i]->compare(std::get<Value>(a[i]), std::get<Value>(b[i]))
                              : const_compare(std::get<Const>(a[i]), std::get<Const>(b[i]));
        if (c != 0) return c;
    }
    return 0;
}

std::string AnswerOrder::format(const Answer& a) const {
    std::string out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ',';
        out += positions_[i] ? positions_[i]->format(std::get<Value>(a[i])) : const_text(std::get<Const>(a[i]));
    }
    return out;
}

}  // namespace dacq
