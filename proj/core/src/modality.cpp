#include "prlf/modality.hpp"

#include "prlf/error.hpp"

namespace prlf {

Modality modality_from_tag(char c) {
    switch (c) {
        case 'v': case 'V': return Modality::V;
        case 'a': case 'A': return Modality::A;
        case 'l': case 'L': return Modality::L;
        default: throw ContractViolation(std::string("unknown modality tag '") + c + "'");
    }
}

ModalitySet ModalitySet::parse(std::string_view tags) {
    ModalitySet s;
    for (char c : tags) {
        const Modality m = modality_from_tag(c);
        require(!s.contains(m), "modality subset repeats a tag: " + std::string(tags));
        s = s.with(m);
    }
    return s;
}

std::string ModalitySet::to_string() const {
    std::string out;
    for (Modality m : kPrecedence)
        if (contains(m)) out += tag(m);
    return out;
}

std::string ModalitySet::label() const {
    std::string out = "{";
    for (char c : to_string()) {
        if (out.size() > 1) out += ',';
        out += c;
    }
    return out + "}";
}

std::array<ModalitySet, 7> evaluation_subsets() {
    return {ModalitySet::parse("l"),  ModalitySet::parse("a"),  ModalitySet::parse("v"),  ModalitySet::parse("la"),
            ModalitySet::parse("lv"), ModalitySet::parse("av"), ModalitySet::parse("lav")};
}

}  // namespace prlf
