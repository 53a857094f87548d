#include "support/fixtures.hpp"

#include <sqlite3.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include "sqlens/vendor_json.hpp"

namespace sqlens::test {
namespace {

namespace fs = std::filesystem;

fs::path make_root() {
  fs::path root = fs::temp_directory_path() / ("sqlens-fix-" + std::to_string(::getpid()));
  fs::create_directories(root);
  static fs::path cleanup_target = root;
  std::atexit([] {
    std::error_code ec;
    fs::remove_all(cleanup_target, ec);
  });
  return root;
}

void exec_script(const std::string& path, const char* script) {
  sqlite3* db = nullptr;
  if (sqlite3_open(path.c_str(), &db) != SQLITE_OK) {
    throw std::runtime_error("fixture: cannot create " + path);
  }
  char* err = nullptr;
  if (sqlite3_exec(db, script, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    sqlite3_close(db);
    throw std::runtime_error("fixture script failed (" + path + "): " + msg);
  }
  sqlite3_close(db);
}

const char* kConcertSingerScript = R"sql(
CREATE TABLE stadium (
  id INTEGER PRIMARY KEY,
  name TEXT,
  location TEXT,
  capacity INTEGER
);
CREATE TABLE singer (
  id INTEGER PRIMARY KEY,
  name TEXT,
  country TEXT,
  age INTEGER
);
CREATE TABLE concert (
  id INTEGER PRIMARY KEY,
  name TEXT,
  year INTEGER,
  stadium_id INTEGER REFERENCES stadium(id),
  singer_id INTEGER REFERENCES singer(id)
);
CREATE TABLE singer_in_concert (
  concert_id INTEGER REFERENCES concert(id),
  singer_id INTEGER REFERENCES singer(id),
  PRIMARY KEY (concert_id, singer_id)
);
CREATE TABLE song (
  id INTEGER PRIMARY KEY,
  title TEXT,
  singer_id INTEGER REFERENCES singer(id),
  sales REAL
);
INSERT INTO stadium VALUES
  (1, 'Starks Park', 'Kirkcaldy', 10104),
  (2, 'Hampden Park', 'Glasgow', 52500),
  (3, 'Bayview Stadium', 'Methil', 2000),
  (4, 'Forthbank Stadium', 'Stirling', 3808);
INSERT INTO singer VALUES
  (1, 'Joe', 'US', 52),
  (2, 'Tribal King', 'France', 25),
  (3, 'Timbaland', 'US', 32),
  (4, 'Justin Brown', 'France', 29),
  (5, 'Rose White', 'UK', 41),
  (6, 'John Nizinik', 'Netherlands', 43);
INSERT INTO concert VALUES
  (1, 'Auditions', 2014, 1, 1),
  (2, 'Super bootcamp', 2014, 2, 3),
  (3, 'Home Visits', 2015, 2, 5),
  (4, 'Week 1', 2014, 3, 2),
  (5, 'Week 2', 2015, 1, 1);
INSERT INTO singer_in_concert VALUES
  (1, 1), (1, 3), (2, 3), (3, 5), (4, 2), (5, 1), (5, 6);
INSERT INTO song VALUES
  (1, 'Sun', 1, 600000.5),
  (2, 'Gentleman', 2, 400000.0),
  (3, 'The Way', 3, 900000.25),
  (4, 'Love', 5, 550000.0),
  (5, 'Dreams', 1, 120000.0),
  (6, 'Echo', 6, 80000.0);
)sql";

const char* kLibraryScript = R"sql(
CREATE TABLE author (
  author_id INTEGER PRIMARY KEY,
  name TEXT,
  birth_year INTEGER,
  country TEXT
);
CREATE TABLE book (
  book_id INTEGER PRIMARY KEY,
  title TEXT,
  author_id INTEGER REFERENCES author(author_id),
  published_year INTEGER,
  price REAL
);
CREATE TABLE member (
  member_id INTEGER PRIMARY KEY,
  name TEXT,
  join_year INTEGER,
  level TEXT
);
CREATE TABLE loan (
  loan_id INTEGER PRIMARY KEY,
  book_id INTEGER REFERENCES book(book_id),
  member_id INTEGER REFERENCES member(member_id),
  loan_date TEXT,
  returned INTEGER
);
INSERT INTO author VALUES
  (1, 'George Orwell', 1903, 'UK'),
  (2, 'Aldous Huxley', 1894, 'UK'),
  (3, 'Ursula Le Guin', 1929, 'US'),
  (4, 'Haruki Murakami', 1949, 'Japan'),
  (5, 'Jane Austen', 1775, 'UK');
INSERT INTO book VALUES
  (1, '1984', 1, 1949, 15.5),
  (2, 'Brave New World', 2, 1932, 12.0),
  (3, 'The Dispossessed', 3, 1974, 22.0),
  (4, 'Kafka on the Shore', 4, 2002, 25.75),
  (5, 'Pride and Prejudice', 5, 1813, 9.99),
  (6, 'Animal Farm', 1, 1945, 11.25),
  (7, 'The Left Hand of Darkness', 3, 1969, 18.0);
INSERT INTO member VALUES
  (1, 'Anna Petrov', 2019, 'gold'),
  (2, 'Ben Silva', 2020, 'silver'),
  (3, 'Chen Wei', 2018, 'gold'),
  (4, 'Dana Smith', 2021, 'basic');
INSERT INTO loan VALUES
  (1, 1, 1, '2023-01-05', 1),
  (2, 3, 1, '2023-02-10', 1),
  (3, 1, 2, '2023-02-11', 0),
  (4, 5, 3, '2023-03-01', 1),
  (5, 7, 1, '2023-03-15', 0),
  (6, 2, 4, '2023-04-02', 1);
)sql";

const char* kShopScript = R"sql(
CREATE TABLE customer (
  customer_id INTEGER PRIMARY KEY,
  name TEXT,
  city TEXT,
  signup_year INTEGER
);
CREATE TABLE product (
  product_id INTEGER PRIMARY KEY,
  name TEXT,
  category TEXT,
  price REAL,
  stock INTEGER
);
CREATE TABLE orders (
  order_id INTEGER PRIMARY KEY,
  customer_id INTEGER REFERENCES customer(customer_id),
  order_date TEXT,
  status TEXT
);
CREATE TABLE order_item (
  order_id INTEGER REFERENCES orders(order_id),
  product_id INTEGER REFERENCES product(product_id),
  quantity INTEGER,
  unit_price REAL,
  PRIMARY KEY (order_id, product_id)
);
INSERT INTO customer VALUES
  (1, 'Acme Corp', 'Paris', 2018),
  (2, 'Jean Dupont', 'Paris', 2020),
  (3, 'Maria Lopez', 'Madrid', 2019),
  (4, 'Tom Ford', 'London', 2021);
INSERT INTO product VALUES
  (1, 'Laptop', 'electronics', 1200.0, 12),
  (2, 'Mouse', 'electronics', 25.5, 140),
  (3, 'Desk', 'furniture', 310.0, 8),
  (4, 'Chair', 'furniture', 95.25, 30),
  (5, 'Monitor', 'electronics', 229.99, 0),
  (6, 'Lamp', 'furniture', 48.5, 55),
  (7, 'Bookshelf', 'furniture', 120.0, 5);
INSERT INTO orders VALUES
  (1, 1, '2023-05-01', 'shipped'),
  (2, 2, '2023-05-03', 'pending'),
  (3, 1, '2023-05-10', 'shipped'),
  (4, 3, '2023-06-01', 'shipped'),
  (5, 2, '2023-06-05', 'cancelled');
INSERT INTO order_item VALUES
  (1, 1, 1, 1200.0),
  (1, 2, 2, 25.5),
  (2, 4, 4, 95.25),
  (3, 5, 1, 229.99),
  (3, 2, 1, 25.5),
  (4, 3, 2, 310.0),
  (5, 6, 3, 48.5);
)sql";

const char* script_for(const std::string& db_id) {
  if (db_id == "concert_singer") return kConcertSingerScript;
  if (db_id == "library") return kLibraryScript;
  if (db_id == "shop") return kShopScript;
  throw std::runtime_error("fixture: unknown db_id " + db_id);
}

TableDef make_table(std::string name, std::vector<ColumnDef> columns,
                    std::vector<ForeignKey> fks = {}) {
  TableDef t;
  t.name = std::move(name);
  t.columns = std::move(columns);
  t.foreign_keys = std::move(fks);
  return t;
}

struct GoldEntry {
  const char* db_id;
  const char* question;
  const char* sql;
  const char* difficulty;
};

const GoldEntry kGolds[] = {
    {"concert_singer", "What are the names of singers older than 30?",
     "SELECT name FROM singer WHERE age > 30", "easy"},
    {"concert_singer", "How many singers are there?", "SELECT count(*) FROM singer", "easy"},
    {"concert_singer", "What is the average age of all singers?", "SELECT avg(age) FROM singer",
     "easy"},
    {"concert_singer", "List stadium names and capacities ordered by capacity, largest first.",
     "SELECT name, capacity FROM stadium ORDER BY capacity DESC", "medium"},
    {"concert_singer", "Which singers have a song with sales above 500000?",
     "SELECT T1.name FROM singer AS T1 JOIN song AS T2 ON T1.id = T2.singer_id WHERE T2.sales > "
     "500000",
     "medium"},
    {"concert_singer", "How many concerts were held in each year?",
     "SELECT year, count(*) FROM concert GROUP BY year", "medium"},
    {"concert_singer", "Which stadiums have never hosted a concert?",
     "SELECT name FROM stadium WHERE id NOT IN (SELECT stadium_id FROM concert)", "hard"},
    {"concert_singer", "How many concerts has each singer performed in?",
     "SELECT s.name, count(*) FROM singer AS s JOIN singer_in_concert AS sic ON s.id = "
     "sic.singer_id GROUP BY s.id, s.name",
     "hard"},
    {"concert_singer", "What are the titles of the three best selling songs?",
     "SELECT title FROM song ORDER BY sales DESC LIMIT 3", "medium"},
    {"concert_singer", "Which countries have at least two singers?",
     "SELECT country, count(*) FROM singer GROUP BY country HAVING count(*) >= 2", "hard"},

    {"library", "Which books were published before 1960?",
     "SELECT title FROM book WHERE published_year < 1960", "easy"},
    {"library", "How many members does the library have?", "SELECT count(*) FROM member", "easy"},
    {"library", "Which authors wrote a book priced above 20?",
     "SELECT DISTINCT a.name FROM author AS a JOIN book AS b ON a.author_id = b.author_id WHERE "
     "b.price > 20",
     "medium"},
    {"library", "What is the average price of all books?", "SELECT avg(price) FROM book", "easy"},
    {"library", "List the names of gold level members.",
     "SELECT name FROM member WHERE level = 'gold'", "easy"},
    {"library", "How many loans does each book have, including books never loaned?",
     "SELECT b.title, count(l.loan_id) FROM book AS b LEFT JOIN loan AS l ON b.book_id = "
     "l.book_id GROUP BY b.book_id, b.title",
     "hard"},
    {"library", "List authors born after 1900 from oldest to youngest.",
     "SELECT name FROM author WHERE birth_year > 1900 ORDER BY birth_year", "medium"},
    {"library", "Which books were written by UK authors?",
     "SELECT title FROM book WHERE author_id IN (SELECT author_id FROM author WHERE country = "
     "'UK')",
     "hard"},
    {"library", "How many distinct members have borrowed a book?",
     "SELECT count(DISTINCT member_id) FROM loan", "medium"},
    {"library", "What is the most expensive book?",
     "SELECT title FROM book ORDER BY price DESC LIMIT 1", "easy"},

    {"shop", "Which products cost more than 100?", "SELECT name FROM product WHERE price > 100",
     "easy"},
    {"shop", "How many orders have been shipped?",
     "SELECT count(*) FROM orders WHERE status = 'shipped'", "easy"},
    {"shop", "Which customers placed more than one order?",
     "SELECT c.name FROM customer AS c JOIN orders AS o ON c.customer_id = o.customer_id GROUP "
     "BY c.customer_id, c.name HAVING count(*) > 1",
     "hard"},
    {"shop", "List product names and stock counts from least to most stocked.",
     "SELECT name, stock FROM product ORDER BY stock", "medium"},
    {"shop", "What is the total revenue across all order items?",
     "SELECT sum(quantity * unit_price) FROM order_item", "medium"},
    {"shop", "Which products have never been ordered?",
     "SELECT name FROM product WHERE product_id NOT IN (SELECT product_id FROM order_item)",
     "hard"},
    {"shop", "What is the average price per product category?",
     "SELECT category, avg(price) FROM product GROUP BY category", "medium"},
    {"shop", "Which customers are based in Paris?",
     "SELECT name FROM customer WHERE city = 'Paris'", "easy"},
    {"shop", "How many items are in each order?",
     "SELECT o.order_id, count(*) FROM orders AS o JOIN order_item AS oi ON o.order_id = "
     "oi.order_id GROUP BY o.order_id",
     "medium"},
    {"shop", "What is the highest product price?", "SELECT max(price) FROM product", "easy"},
};

// tables.json entry mirroring the loader's on-disk contract: names as
// [table_index, name] pairs with the leading [-1, "*"] entry real files carry.
nlohmann::json tables_json_entry(const DatabaseSchema& schema) {
  nlohmann::json entry;
  entry["db_id"] = schema.db_id;
  nlohmann::json table_names = nlohmann::json::array();
  nlohmann::json column_names = nlohmann::json::array();
  nlohmann::json column_types = nlohmann::json::array();
  nlohmann::json primary_keys = nlohmann::json::array();
  nlohmann::json foreign_keys = nlohmann::json::array();

  column_names.push_back(nlohmann::json::array({-1, "*"}));
  column_types.push_back("text");

  std::vector<std::pair<std::string, std::string>> flat;  // (table, column) per global index
  flat.emplace_back("", "*");
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    const TableDef& table = schema.tables[t];
    table_names.push_back(table.name);
    for (const ColumnDef& col : table.columns) {
      column_names.push_back(nlohmann::json::array({static_cast<int>(t), col.name}));
      column_types.push_back(col.declared_type);
      flat.emplace_back(table.name, col.name);
      if (col.is_primary_key) primary_keys.push_back(flat.size() - 1);
    }
  }
  auto flat_index = [&](const std::string& table, const std::string& column) {
    for (std::size_t i = 1; i < flat.size(); ++i) {
      if (flat[i].first == table && flat[i].second == column) return static_cast<int>(i);
    }
    throw std::runtime_error("fixture: foreign key endpoint missing");
  };
  for (const TableDef& table : schema.tables) {
    for (const ForeignKey& fk : table.foreign_keys) {
      foreign_keys.push_back(nlohmann::json::array(
          {flat_index(table.name, fk.local_column),
           flat_index(fk.foreign_table, fk.foreign_column)}));
    }
  }

  entry["table_names_original"] = table_names;
  entry["table_names"] = table_names;
  entry["column_names_original"] = column_names;
  entry["column_names"] = column_names;
  entry["column_types"] = column_types;
  entry["primary_keys"] = primary_keys;
  entry["foreign_keys"] = foreign_keys;
  return entry;
}

}  // namespace

fs::path fixture_root() {
  static fs::path root = make_root();
  return root;
}

fs::path fixture_db(const std::string& db_id) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  fs::path path = fixture_root() / (db_id + ".sqlite");
  if (!fs::exists(path)) exec_script(path.string(), script_for(db_id));
  return path;
}

fs::path make_db(const std::string& filename, const char* script) {
  fs::path path = fixture_root() / filename;
  if (!fs::exists(path)) exec_script(path.string(), script);
  return path;
}

DatabaseSchema concert_singer_schema() {
  DatabaseSchema s;
  s.db_id = "concert_singer";
  s.tables.push_back(make_table("stadium", {{"id", "INTEGER", true},
                                            {"name", "TEXT", false},
                                            {"location", "TEXT", false},
                                            {"capacity", "INTEGER", false}}));
  s.tables.push_back(make_table("singer", {{"id", "INTEGER", true},
                                           {"name", "TEXT", false},
                                           {"country", "TEXT", false},
                                           {"age", "INTEGER", false}}));
  s.tables.push_back(make_table("concert",
                                {{"id", "INTEGER", true},
                                 {"name", "TEXT", false},
                                 {"year", "INTEGER", false},
                                 {"stadium_id", "INTEGER", false},
                                 {"singer_id", "INTEGER", false}},
                                {{"stadium_id", "stadium", "id"}, {"singer_id", "singer", "id"}}));
  s.tables.push_back(make_table("singer_in_concert",
                                {{"concert_id", "INTEGER", true},
                                 {"singer_id", "INTEGER", true}},
                                {{"concert_id", "concert", "id"}, {"singer_id", "singer", "id"}}));
  s.tables.push_back(make_table("song",
                                {{"id", "INTEGER", true},
                                 {"title", "TEXT", false},
                                 {"singer_id", "INTEGER", false},
                                 {"sales", "REAL", false}},
                                {{"singer_id", "singer", "id"}}));
  s.validate();
  return s;
}

DatabaseSchema library_schema() {
  DatabaseSchema s;
  s.db_id = "library";
  s.tables.push_back(make_table("author", {{"author_id", "INTEGER", true},
                                           {"name", "TEXT", false},
                                           {"birth_year", "INTEGER", false},
                                           {"country", "TEXT", false}}));
  s.tables.push_back(make_table("book",
                                {{"book_id", "INTEGER", true},
                                 {"title", "TEXT", false},
                                 {"author_id", "INTEGER", false},
                                 {"published_year", "INTEGER", false},
                                 {"price", "REAL", false}},
                                {{"author_id", "author", "author_id"}}));
  s.tables.push_back(make_table("member", {{"member_id", "INTEGER", true},
                                           {"name", "TEXT", false},
                                           {"join_year", "INTEGER", false},
                                           {"level", "TEXT", false}}));
  s.tables.push_back(make_table("loan",
                                {{"loan_id", "INTEGER", true},
                                 {"book_id", "INTEGER", false},
                                 {"member_id", "INTEGER", false},
                                 {"loan_date", "TEXT", false},
                                 {"returned", "INTEGER", false}},
                                {{"book_id", "book", "book_id"},
                                 {"member_id", "member", "member_id"}}));
  s.validate();
  return s;
}

DatabaseSchema shop_schema() {
  DatabaseSchema s;
  s.db_id = "shop";
  s.tables.push_back(make_table("customer", {{"customer_id", "INTEGER", true},
                                             {"name", "TEXT", false},
                                             {"city", "TEXT", false},
                                             {"signup_year", "INTEGER", false}}));
  s.tables.push_back(make_table("product", {{"product_id", "INTEGER", true},
                                            {"name", "TEXT", false},
                                            {"category", "TEXT", false},
                                            {"price", "REAL", false},
                                            {"stock", "INTEGER", false}}));
  s.tables.push_back(make_table("orders",
                                {{"order_id", "INTEGER", true},
                                 {"customer_id", "INTEGER", false},
                                 {"order_date", "TEXT", false},
                                 {"status", "TEXT", false}},
                                {{"customer_id", "customer", "customer_id"}}));
  s.tables.push_back(make_table("order_item",
                                {{"order_id", "INTEGER", true},
                                 {"product_id", "INTEGER", true},
                                 {"quantity", "INTEGER", false},
                                 {"unit_price", "REAL", false}},
                                {{"order_id", "orders", "order_id"},
                                 {"product_id", "product", "product_id"}}));
  s.validate();
  return s;
}

DatabaseSchema schema_for(const std::string& db_id) {
  if (db_id == "concert_singer") return concert_singer_schema();
  if (db_id == "library") return library_schema();
  if (db_id == "shop") return shop_schema();
  throw std::runtime_error("fixture: unknown db_id " + db_id);
}

fs::path write_benchmark_dir(const std::string& name) {
  fs::path root = fixture_root() / name;
  if (fs::exists(root / "tables.json")) return root;
  fs::create_directories(root);

  nlohmann::json tables = nlohmann::json::array();
  for (const char* db_id : {"concert_singer", "library", "shop"}) {
    tables.push_back(tables_json_entry(schema_for(db_id)));
    fs::path db_dir = root / "database" / db_id;
    fs::create_directories(db_dir);
    fs::copy_file(fixture_db(db_id), db_dir / (std::string(db_id) + ".sqlite"),
                  fs::copy_options::overwrite_existing);
  }
  std::ofstream(root / "tables.json") << tables.dump(2) << "\n";

  nlohmann::json questions = nlohmann::json::array();
  for (const GoldEntry& gold : kGolds) {
    nlohmann::json q;
    q["db_id"] = gold.db_id;
    q["question"] = gold.question;
    q["query"] = gold.sql;
    q["difficulty"] = gold.difficulty;
    questions.push_back(std::move(q));
  }
  std::ofstream(root / "dev.json") << questions.dump(2) << "\n";
  return root;
}

}  // namespace sqlens::test
