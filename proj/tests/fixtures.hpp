#pragma once

#include <string>
#include <vector>

#include "rci/table.hpp"

namespace rci::test {

inline Table congress_table() {
  return Table("congress",
               {"Name", "Took office", "Left office", "Party", "Notes / Events"},
               {{"Benjamin Contee", "1789", "1791", "Anti-Administration", ""},
                {"William Pinkney", "1791", "1791", "Pro-Administration", "resigned"},
                {"John Francis Mercer", "1792", "1793", "Anti-Administration", ""},
                {"Uriah Forrest", "1793", "1794", "Pro-Administration", "resigned"},
                {"Benjamin Edwards", "1795", "1795", "Pro-Administration", ""}});
}

inline const char* kCongressQuestion = "What party was William Pinkney and Uriah Forrest a part of?";

inline std::string congress_jsonl() {
  return R"({"id":"congress","header":["Name","Took office","Left office","Party","Notes / Events"],)"
         R"("rows":[["Benjamin Contee","1789","1791","Anti-Administration",""],)"
         R"(["William Pinkney","1791","1791","Pro-Administration","resigned"],)"
         R"(["John Francis Mercer","1792","1793","Anti-Administration",""],)"
         R"(["Uriah Forrest","1793","1794","Pro-Administration","resigned"],)"
         R"(["Benjamin Edwards","1795","1795","Pro-Administration",""]]})";
}

}  // namespace rci::test
